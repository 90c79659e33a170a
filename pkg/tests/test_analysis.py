import math

import numpy as np
import pytest

from gietrenorm import diffeo
from gietrenorm.analysis import (
    PiecewiseObservable,
    birkhoff_sum,
    distances,
    distortion_check,
    floor_envelope,
    level_invariants,
    level_table,
    linear_fit,
    log_derivative_observable,
    mesh_decay,
    nonlinearity_decrease_probe,
    reconstruct_conjugacy,
    special_birkhoff_sums,
    special_log_derivative_sums,
    summarize_mesh,
    wandering_detect,
)
from gietrenorm.errors import ConfigError
from gietrenorm.fixtures import golden_iet, moebius_conjugate
from gietrenorm.giet import conjugate
from gietrenorm.renorm import LengthOrbit, RenormState


def test_linear_fit_exact_line():
    f = linear_fit([0, 1, 2, 3], [1, 3, 5, 7])
    assert (f.slope, f.intercept, f.r2) == pytest.approx((2, 1, 1))
    assert f.accepted
    assert linear_fit([0, 1], [0, 1]).r2 == 0.0


def test_mesh_verdicts():
    levels = list(range(1, 11))
    decay = summarize_mesh(levels, [0.5**k for k in levels])
    assert decay.verdict == "decay" and decay.alpha == pytest.approx(0.5)
    flat = summarize_mesh(levels, [0.2] * 10)
    assert flat.verdict == "bounded-below" and flat.monotone


def test_mesh_decays_for_periodic_iet(d4):
    md = mesh_decay(LengthOrbit(d4, track_words=True), 25)
    assert md.verdict == "decay" and md.monotone
    assert md.alpha < 1


def test_special_sums_of_constant_observable_are_heights(d4):
    orb = LengthOrbit(d4, track_words=True).run(6)
    f = PiecewiseObservable(values=np.ones(4))
    assert special_birkhoff_sums(orb, f).tolist() == orb.q


def test_birkhoff_decomposition(d4):
    orb = LengthOrbit(d4, track_words=True).run(5)
    f = PiecewiseObservable(values=np.array([1.0, -2.0, 0.5, 3.0]))
    s = birkhoff_sum(d4, f, 0.123456, 500, orb)
    assert abs(s.difference) < 1e-9
    assert any(kind == "special" for kind, _, _ in s.pieces)
    g = PiecewiseObservable(func=lambda x: np.sin(7 * x))
    s = birkhoff_sum(d4, g, 0.123456, 300, orb)
    assert abs(s.difference) < 1e-9


def test_log_derivative_sums_match_observable():
    T = moebius_conjugate(golden_iet(), 0.4)
    st_ = RenormState(T).run(6)
    f = log_derivative_observable(T)
    (xs, direct), = special_birkhoff_sums(st_, f, points=5)[:1]
    (_, compiled), = special_log_derivative_sums(st_, points=5)[:1]
    assert compiled == pytest.approx(direct, abs=1e-10)


def test_observable_needs_one_form():
    with pytest.raises(ConfigError):
        PiecewiseObservable()


def test_distortion_within_bound():
    T = moebius_conjugate(golden_iet(), 0.7)
    rep = distortion_check(RenormState(T).run(15), 100)
    assert rep.ok
    assert 1.0 <= rep.max_ratio <= rep.bound * (1 + 1e-6)


def test_distances_vanish_for_iet(golden):
    d = distances(golden)
    assert d.d_eta_affine == 0 and d.d_c1_standard < 1e-14 and d.schwarzian_proxy == 0


def test_distances_moebius():
    T = moebius_conjugate(golden_iet(), 0.5)
    d = distances(T)
    assert d.d_eta_quadrature == pytest.approx(d.d_eta_affine, abs=1e-9)
    assert d.schwarzian_proxy == 0


def test_invariants_preserved_for_polynomial_conjugate(golden):
    # a profile outside the Moebius family, on fewer levels to keep the
    # generic composition path fast
    T = conjugate(golden, diffeo.PolyPerturb(0.2, (0.0, 1.0, -1.0)))
    inv = level_invariants(T, 8)
    assert max(abs(m - inv.mean[0]) for m in inv.mean) <= 1e-8
    assert all(b <= a for a, b in zip(inv.total, inv.total[1:]))
    b0 = np.array(inv.boundary[0])
    assert max(np.abs(np.array(b) - b0).max() for b in inv.boundary) <= 1e-8


def test_nonlinearity_probe_decreases():
    T = moebius_conjugate(golden_iet(), 0.5)
    probe = nonlinearity_decrease_probe(T, 2, 10)
    assert probe.monotone and probe.ratio < 1 and not probe.degenerate
    assert nonlinearity_decrease_probe(golden_iet(), 2, 4).degenerate


def test_conjugacy_reconstruction_golden():
    u = 0.3
    T0 = golden_iet()
    cand = reconstruct_conjugacy(moebius_conjugate(T0, u), T0)
    assert cand.defect <= 1e-6
    assert cand.distance_to(diffeo.Moebius(u).inverse) <= 1e-4


def test_floor_envelope_monotone():
    logs = -np.abs(np.arange(-20, 21)) ** 0.5
    r, env = floor_envelope(logs, 20)
    assert np.all(np.diff(env) <= 1e-15)
    assert r[0] == 1


def test_wandering_verdicts(divergent, d4):
    rep = wandering_detect(LengthOrbit(divergent, "extended", 200, track_words=True), 40)
    assert rep.verdict == "distorted" and rep.gamma > 0 and rep.mmy_holds
    ctl = wandering_detect(LengthOrbit(d4, "extended", 80, track_words=True), 40)
    assert ctl.verdict == "not-distorted"


def test_level_table_rows(d4):
    rows = level_table(LengthOrbit(d4, track_words=True), 5)
    assert [r["level"] for r in rows] == list(range(6))
    assert all(r["total_nonlinearity"] == 0 for r in rows)
    assert rows[-1]["mesh"] < rows[0]["mesh"]
    assert math.isfinite(rows[-1]["schwarzian_proxy"])
