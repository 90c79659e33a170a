import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gietrenorm import diffeo
from gietrenorm.errors import ConfigError, DomainError, MonotonicityError


def _fd_jet(f, x, h=1e-4):
    # central differences of the value for orders 1..3
    v = lambda t: float(f(t))
    d1 = (v(x + h) - v(x - h)) / (2 * h)
    d2 = (v(x + h) - 2 * v(x) + v(x - h)) / h**2
    d3 = (v(x + 2 * h) - 2 * v(x + h) + 2 * v(x - h) - v(x - 2 * h)) / (2 * h**3)
    return d1, d2, d3


BRANCHES = [
    diffeo.Moebius(0.7),
    diffeo.Moebius(-1.3, (0.2, 0.5), (0.1, 0.9)),
    diffeo.PolyPerturb(0.2, (0.0, 1.0, -1.0)),
    diffeo.MoebiusGeneral(2.0, 0.0, 1.0, 1.0),
    diffeo.Composite(diffeo.Moebius(0.4), diffeo.PolyPerturb(0.1, (0.0, 1.0, 0.0, -1.0))),
    diffeo.Inverse(diffeo.PolyPerturb(0.2, (0.0, 1.0, -1.0))),
]


@pytest.mark.parametrize("f", BRANCHES, ids=lambda f: f.kind)
def test_jets_match_finite_differences(f):
    x0, x1 = f.domain
    for t in (0.25, 0.5, 0.8):
        x = x0 + t * (x1 - x0)
        jet = f.jet(x, 3)
        fd = _fd_jet(f, x, 1e-3 * (x1 - x0))
        assert abs(jet[1] - fd[0]) < 1e-6 * max(1, abs(jet[1]))
        assert abs(jet[2] - fd[1]) < 1e-3 * max(1, abs(jet[2]))
        assert abs(jet[3] - fd[2]) < 1e-2 * max(1, abs(jet[3]))


@pytest.mark.parametrize("f", BRANCHES, ids=lambda f: f.kind)
def test_inverse_roundtrip(f):
    x0, x1 = f.domain
    x = np.linspace(x0, x1, 33)
    assert np.max(np.abs(f.inverse(f(x)) - x)) < 1e-12


@pytest.mark.parametrize("f", BRANCHES, ids=lambda f: f.kind)
def test_mean_nonlinearity_closed_form_matches_quadrature(f):
    s = diffeo.nonlinearity_summary(f)
    assert s.mean == pytest.approx(f.mean_nonlinearity_closed(), abs=1e-9)
    assert s.total >= abs(s.mean) - 1e-12


def test_moebius_eta_has_one_sign_and_zero_schwarzian():
    f = diffeo.Moebius(0.9)
    x = np.linspace(0, 1, 101)
    e = diffeo.eta(f, x)
    assert np.all(e > 0) or np.all(e < 0)
    assert np.max(np.abs(diffeo.schwarzian(f, x))) < 1e-10
    s = diffeo.nonlinearity_summary(f)
    # one-signed eta: total equals |mean|
    assert s.total == pytest.approx(abs(s.mean), abs=1e-10)


def test_moebius_closed_form_value():
    # m(y) = a y / (1 + (a-1) y), log Dm(1) - log Dm(0) = -2 log a = u
    u = 0.37
    f = diffeo.Moebius(u)
    a = math.exp(-u / 2)
    assert f(0.5) == pytest.approx(a * 0.5 / (1 + (a - 1) * 0.5))
    assert f.mean_nonlinearity_closed() == u


def test_composite_nonlinearity_is_additive():
    f, g = diffeo.Moebius(0.4), diffeo.Moebius(-0.1)
    h = diffeo.Composite(f, g)
    assert h.mean_nonlinearity_closed() == pytest.approx(0.3, abs=1e-12)


def test_domain_and_monotonicity_errors():
    with pytest.raises(DomainError):
        diffeo.Moebius(0.2).jet(1.5)
    with pytest.raises(MonotonicityError):
        diffeo.PolyPerturb(2.0, (0.0, 1.0, -1.0))
    with pytest.raises(ConfigError):
        diffeo.PolyPerturb(0.1, (1.0, 1.0))
    with pytest.raises(ConfigError):
        diffeo.branch_from_dict({"kind": "spline"})
    with pytest.raises(ConfigError):
        diffeo.eval_jet(diffeo.Moebius(0.1), 0.5, order=4)


@pytest.mark.parametrize("f", BRANCHES, ids=lambda f: f.kind)
def test_dict_roundtrip(f):
    g = diffeo.branch_from_dict(f.to_dict())
    x = np.linspace(*f.domain, 9)
    assert np.allclose(g(x), f(x), atol=1e-14)


def test_reconstruct_from_eta_recovers_moebius():
    f = diffeo.Moebius(0.8)
    g = diffeo.reconstruct_from_eta(lambda x: diffeo.eta(f, x))
    x = np.linspace(0, 1, 101)
    assert np.max(np.abs(g(x) - f(x))) < 1e-8


def test_normalize_maps_unit_interval():
    f = diffeo.normalize(diffeo.Moebius(0.3, (0.2, 0.6), (0.1, 0.4)))
    assert f(0.0) == pytest.approx(0.0, abs=1e-14)
    assert f(1.0) == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_moebius_family_is_a_group(u, v):
    h = diffeo.Composite(diffeo.Moebius(u), diffeo.Moebius(v))
    x = np.linspace(0, 1, 17)
    assert np.max(np.abs(h(x) - diffeo.Moebius(u + v)(x))) < 1e-12
