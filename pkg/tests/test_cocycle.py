import math

import numpy as np
import pytest

from gietrenorm import intmat
from gietrenorm.cocycle import (
    forward_splitting,
    lyapunov_spectrum,
    oseledets_spaces,
    principal_angles,
    rdc_report,
    restricted_norm,
)
from gietrenorm.combinatorics import RotationPath, symmetric_pair
from gietrenorm.errors import ConfigError, MissingSplitting, WindowTooShort
from gietrenorm.fixtures import d4_loop, zorich_blocks, zorich_period
from gietrenorm.giet import path_matrix

LOOP = d4_loop()
P = zorich_period(LOOP)
BLOCKS = zorich_blocks(LOOP)
A = np.array(path_matrix(LOOP), dtype=float)


def _eig_spaces():
    vals, vecs = np.linalg.eig(A)
    order = np.argsort(-np.abs(vals))
    vecs = np.real(vecs[:, order])
    return vecs[:, :2], vecs[:, 2:]


def test_loop_matrix_spectrum():
    # frozen oracle values of the d = 4 loop
    vals = sorted(np.abs(np.linalg.eigvals(A)), reverse=True)
    assert vals == pytest.approx([4.3903, 1.8379, 0.5441, 0.2278], abs=1e-4)
    assert np.prod(vals) == pytest.approx(1.0)
    assert P == 6


def test_zorich_blocks_multiply_to_loop_matrix():
    assert intmat.product(BLOCKS, 4) == path_matrix(LOOP)


def test_constant_cocycle_exponents():
    m = ((2, 1), (1, 1))
    est = lyapunov_spectrum([m] * 600)
    lead = math.log((3 + math.sqrt(5)) / 2)
    assert est.thetas == pytest.approx([lead, -lead], rel=1e-3)
    assert est.trace and est.trace[-1][0] == 600


def test_lyapunov_needs_enough_steps():
    with pytest.raises(ConfigError):
        lyapunov_spectrum([((1, 1), (0, 1))] * 10)


def test_periodic_exponents_match_eigenvalues():
    est = lyapunov_spectrum(BLOCKS * 200)
    oracle = np.sort(np.log(np.abs(np.linalg.eigvals(A))) / P)[::-1]
    assert est.thetas == pytest.approx(oracle, rel=1e-2)


def test_splitting_converges_to_eigenspaces():
    eu, es = _eig_spaces()
    N = 50 * P
    mats = BLOCKS * 100
    sp = oseledets_spaces(mats, 0, N, 2, 1, past=BLOCKS * 50)
    assert np.max(principal_angles(sp.gamma_u, eu)) <= 1e-6
    assert np.max(principal_angles(sp.gamma_s, es)) <= 1e-6
    assert sp.gamma_c.shape == (4, 0)


def test_splitting_invariance_residual():
    mats = BLOCKS * 120
    past = BLOCKS * 60
    for n in (0, 3):
        s0 = oseledets_spaces(mats, n, 40 * P, 2, 1, past=past)
        s1 = oseledets_spaces(mats, n + 1, 40 * P, 2, 1, past=past)
        z = intmat.to_float(mats[n])
        for name in ("gamma_s", "gamma_u"):
            img = z @ getattr(s0, name)
            q, _ = np.linalg.qr(getattr(s1, name))
            resid = img - q @ (q.T @ img)
            assert np.abs(resid).sum(axis=0).max() / np.abs(img).sum(axis=0).min() <= 1e-4


def test_central_space_for_two_singularities():
    # symmetric d = 5 has kappa = 2, so one central direction
    pi = symmetric_pair(5)
    loop = RotationPath.from_moves(pi, "tttbtbbttbtb")
    assert loop.is_closed()
    mats = zorich_blocks(loop) * 80
    sp = oseledets_spaces(mats, 0, 150, 2, 2, past=zorich_blocks(loop) * 40)
    assert sp.gamma_c.shape == (5, 1)


def test_window_checks():
    with pytest.raises(WindowTooShort):
        oseledets_spaces(BLOCKS * 5, 0, 60, 2, 1)
    with pytest.raises(ConfigError):
        oseledets_spaces(BLOCKS * 30, 0, 60, 2, 2)


def test_forward_splitting_stable_space():
    _, es = _eig_spaces()
    sp = forward_splitting(BLOCKS * 60, 50 * P, 2, 1)
    assert np.max(principal_angles(sp.gamma_s, es)) <= 1e-6
    assert "unstable" in sp.notes


def test_restricted_norm_identity():
    basis = np.eye(3)[:, :2]
    assert restricted_norm(np.eye(3), basis) == 1.0
    assert restricted_norm(np.eye(3), np.zeros((3, 0))) == 0.0


def test_rdc_periodic_ratio():
    mats = BLOCKS * 80
    past = BLOCKS * 40
    sp = 2 * P
    times = list(range(0, 25 * sp + 1, sp))
    splits = {n: oseledets_spaces(mats, n, 120, 2, 1, past=past) for n in times}
    rep = rdc_report(mats, times, splits)
    theta_g = math.log(sorted(np.abs(np.linalg.eigvals(A)))[-2]) / P
    target = math.exp(-theta_g * sp)
    assert rep.fitted_ratio_B == pytest.approx(target, rel=0.2)
    assert rep.fitted_ratio_F == pytest.approx(target, rel=0.2)
    assert rep.hyperbolic
    assert rep.delta_hat > 0.1
    assert rep.subexp_stat[-1] < rep.subexp_stat[0] / 5


def test_rdc_needs_splittings():
    with pytest.raises(MissingSplitting):
        rdc_report(BLOCKS * 10, [0, 12, 24], {})
