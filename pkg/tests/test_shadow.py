import numpy as np
import pytest

from gietrenorm.errors import NumericError, WindowTooShort
from gietrenorm.fixtures import d4_loop, expanding_direction, golden_iet, moebius_conjugate, zorich_blocks
from gietrenorm.giet import path_matrix
from gietrenorm.renorm import LengthOrbit
from gietrenorm.shadow import (
    ShadowThresholds,
    classify,
    deviation_summary,
    periodic_deviation,
    residual_trace,
    run_shadow,
    track,
)

LOOP = d4_loop()
BLOCKS = zorich_blocks(LOOP)


def test_track_of_affine_map_is_linear(divergent):
    tr = track(LengthOrbit(divergent, "extended", 200), 24)
    assert tr.K_T == 0
    assert np.abs(tr.errors).max() < 1e-9


def test_track_bound_on_moebius_map():
    T = moebius_conjugate(golden_iet(), 0.6)
    tr = track(LengthOrbit(T), 20)
    norms = np.array([np.abs(np.array(z)).sum() for z in tr.matrices])
    assert np.all(tr.error_norms() <= tr.K_T * norms + 1e-12)
    with pytest.raises(NumericError):
        track(LengthOrbit(T), 20, K_T=0.0)


def test_divergent_shadow_is_expanding_direction(divergent):
    run = run_shadow(LengthOrbit(divergent, "extended", 200), 54, 120,
                     past=BLOCKS * 20, continuation=BLOCKS, spacing=12, extend=12)
    assert run.verdict.case == "divergent"
    w = expanding_direction(LOOP)
    assert run.shadow.v == pytest.approx(w, abs=1e-6)
    assert residual_trace(run.track, run.shadow.v)[-1] <= 0.1
    dev = periodic_deviation(run.track, run.shadow.v, len(BLOCKS), path_matrix(LOOP))
    assert deviation_summary(dev, 1e-9).bounded


def test_shadow_without_past_uses_forward_complement(divergent):
    run = run_shadow(LengthOrbit(divergent, "extended", 200), 30, 120,
                     continuation=BLOCKS, spacing=12, extend=0)
    assert run.splittings[0].notes
    assert run.surrogate == 120


def test_shadow_needs_forward_window(d4):
    with pytest.raises(WindowTooShort):
        run_shadow(LengthOrbit(d4), 10, 400, extend=0)


def test_iet_is_recurrent(d4):
    tr = track(LengthOrbit(d4), 30)
    v = classify(tr, None, list(range(0, 31, 12)))
    assert v.case == "recurrent"
    assert v.sup_return_norm == 0


def test_short_orbit_is_ambiguous(d4):
    tr = track(LengthOrbit(d4), 2)
    v = classify(tr, None, None, ShadowThresholds(min_growth=1e9))
    assert v.case == "ambiguous" and v.reasons


def test_moebius_conjugate_returns_to_zero():
    T = moebius_conjugate(golden_iet(), 0.5)
    tr = track(LengthOrbit(T), 30)
    assert tr.omega_norms()[-1] < 1e-6 * tr.omega_norms()[0]
    assert classify(tr, None, list(range(0, 31, 4))).case == "recurrent"


def test_deviation_summary_floor():
    s = deviation_summary([1e-14, 3e-12, 1e-13], 1e-9)
    assert s.bounded and s.range == 0
    s = deviation_summary([1.0, 5.0, 50.0], 1e-9)
    assert not s.bounded


def test_verdict_serialization(d4):
    tr = track(LengthOrbit(d4), 6)
    v = classify(tr, None)
    assert v.to_csv().splitlines()[0] == "n,omega_norm,error_norm,residual_ratio"
    assert '"case"' in v.to_json()
