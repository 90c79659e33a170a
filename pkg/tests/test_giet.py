import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gietrenorm import diffeo
from gietrenorm.combinatorics import rotation_pair, symmetric_pair
from gietrenorm.errors import ConfigError, SingularityHit
from gietrenorm.fixtures import d4_loop, golden_loop, moebius_conjugate
from gietrenorm.giet import (
    Giet,
    Iet,
    affine_from_slopes,
    conjugate,
    giet_from_json,
    hyperbolic_periodic_aiet,
    is_primitive,
    path_matrix,
    perron_vector,
    periodic_type_iet,
    with_moebius,
)

GOLD = (math.sqrt(5) - 1) / 2


def test_golden_rotation(golden):
    assert golden.lam == pytest.approx([GOLD**2, GOLD])
    x = np.array([0.1, 0.5, 0.9])
    # a two-interval exchange is the rotation by the length of the second interval
    assert golden(x) == pytest.approx((x + golden.lam[1]) % 1.0)


def test_iet_preserves_lebesgue(d4):
    x = np.sort(np.random.default_rng(0).uniform(0, 1, 4000))
    y = d4(x)
    # the image of a uniform sample is uniform: compare the empirical distribution
    assert np.max(np.abs(np.sort(y) - x)) < 0.05
    assert np.max(np.abs(d4.inverse_eval(y) - x)) < 1e-14


def test_bottom_partition_identity():
    T = affine_from_slopes(symmetric_pair(4), [0.1, 0.2, 0.3, 0.4], [0.5, -0.2, 0.1, 0.0])
    assert float(np.exp(T.omega) @ T.lam) == pytest.approx(1.0)
    y = T(np.linspace(0.001, 0.999, 300))
    assert y.min() >= 0 and y.max() <= 1


def test_invalid_maps_rejected():
    with pytest.raises(ConfigError):
        Iet(symmetric_pair(3), [0.5, 0.5, 0.1])
    with pytest.raises(ConfigError):
        Iet(symmetric_pair(3), [0.5, 0.6, -0.1])
    with pytest.raises(ConfigError):
        Giet(symmetric_pair(2), [0.5, 0.5], [0.1, 0.1], (diffeo.Moebius(0),) * 2)


def test_singularity_detection(golden):
    with pytest.raises(SingularityHit):
        golden.check_singular(golden.top_cuts[1])


def test_json_roundtrip(golden):
    T = moebius_conjugate(golden, 0.4)
    U = giet_from_json(T.to_json())
    x = np.linspace(0.01, 0.99, 21)
    assert np.allclose(U(x), T(x), atol=1e-14)
    assert U.kind == T.kind == "miet"


def test_iet_boundary_vanishes(d4):
    assert np.all(d4.boundary().values == 0)
    assert d4.mean_nonlinearity() == 0 and d4.total_nonlinearity() == 0


def test_conjugate_is_conjugate(golden):
    h = diffeo.Moebius(0.6)
    T = conjugate(golden, h)
    x = np.linspace(0.013, 0.987, 50)
    assert np.max(np.abs(T(h(x)) - h(golden(x)))) < 1e-12
    assert abs(T.mean_nonlinearity()) < 1e-12
    assert np.max(np.abs(T.boundary().values)) < 1e-12


def test_conjugate_by_polynomial(golden):
    h = diffeo.PolyPerturb(0.2, (0.0, 1.0, -1.0))
    T = conjugate(golden, h)
    x = np.linspace(0.013, 0.987, 50)
    assert np.max(np.abs(T(h(x)) - h(golden(x)))) < 1e-12
    assert T.kind == "giet"


def test_periodic_type_lengths_are_perron():
    loop = d4_loop()
    a = path_matrix(loop)
    assert is_primitive(a)
    T = periodic_type_iet(loop)
    at = np.array(a, dtype=float).T
    v = at @ T.lam
    assert v / v.sum() == pytest.approx(T.lam, abs=1e-14)


def test_perron_extended_agrees():
    a = path_matrix(golden_loop())
    v, th = perron_vector(a)
    w, th2 = perron_vector(a, dps=50)
    assert [float(x) for x in w] == pytest.approx(v.tolist(), abs=1e-15)
    assert float(th2) == pytest.approx(th)


def test_hyperbolic_aiet_needs_orthogonal_slopes():
    with pytest.raises(ConfigError):
        hyperbolic_periodic_aiet(d4_loop(), [1.0, 0.0, 0.0, 0.0])


def test_moebius_profiles_total_nonlinearity():
    T = with_moebius(Iet(rotation_pair(2), [0.3, 0.7]), [0.5, -0.2])
    assert T.mean_nonlinearity() == pytest.approx(0.3)
    assert T.total_nonlinearity() == pytest.approx(0.7)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.05, 1.0), min_size=4, max_size=4),
       st.lists(st.floats(-1.0, 1.0), min_size=4, max_size=4))
def test_affine_maps_are_bijections(lengths, slopes):
    lam = np.array(lengths) / sum(lengths)
    T = affine_from_slopes(symmetric_pair(4), lam, slopes)
    x = np.linspace(0, 1, 257)[1:-1]
    x = x[np.min(np.abs(x[:, None] - T.top_cuts[None, 1:-1]), axis=1) > 1e-9]
    assert np.max(np.abs(T.inverse_eval(T(x)) - x)) < 1e-12
