"""Ready-made maps used by the tests, scripts and the command line."""
from __future__ import annotations

import math

import mpmath
import numpy as np

from . import diffeo, intmat
from .combinatorics import (
    Move,
    PermutationPair,
    RotationPath,
    elementary_matrix,
    is_irreducible,
    rauzy_move,
    rotation_pair,
    symmetric_pair,
)
from .errors import ConfigError
from .giet import Aiet, Giet, Iet, conjugate, path_matrix, perron_vector, with_moebius

GOLDEN_MOVES = "tb"
# a closed Rauzy path on the symmetric d = 4 pair with a positive period
# matrix whose two expanding eigenvalues are real and distinct
D4_LOOP_MOVES = "ttbtbbtb"


def loop_from_moves(pi: PermutationPair, moves: str) -> RotationPath:
    path = RotationPath.from_moves(pi, [Move.TOP if c == "t" else Move.BOTTOM for c in moves])
    if not path.is_closed():
        raise ConfigError(f"moves {moves!r} do not close up at {pi}")
    return path


def golden_loop() -> RotationPath:
    return loop_from_moves(rotation_pair(2), GOLDEN_MOVES)


def d4_loop() -> RotationPath:
    return loop_from_moves(symmetric_pair(4), D4_LOOP_MOVES)


def zorich_period(loop: RotationPath) -> int:
    """Number of Zorich steps in one pass of a loop whose first and last
    moves differ."""
    moves = loop.moves
    if moves[0] == moves[-1]:
        raise ConfigError("loop must start and end with different moves")
    return 1 + sum(1 for a, b in zip(moves, moves[1:]) if a != b)


def zorich_blocks(loop: RotationPath) -> list[intmat.Matrix]:
    """Zorich matrices of one pass of ``loop``."""
    mats, cur, prev = [], None, None
    for arrow in loop.arrows:
        e = elementary_matrix(arrow)
        if prev is not None and arrow.move != prev:
            mats.append(cur)
            cur = None
        cur = e if cur is None else intmat.matmul(e, cur)
        prev = arrow.move
    mats.append(cur)
    return [tuple(map(tuple, m)) for m in mats]


def periodic_iet(loop: RotationPath, dps: int | None = None) -> Iet:
    """Periodic-type IET of ``loop``; with ``dps`` its lengths are also
    stored at that many digits for extended-precision runs."""
    a = path_matrix(loop)
    at = [list(r) for r in zip(*a)]
    lam, theta = perron_vector(at)
    meta = {"theta": float(theta), "period": len(loop), "loop": loop.to_dict()}
    if dps:
        lam_mp, _ = perron_vector(at, dps=dps)
        with mpmath.workdps(dps):
            meta["exact"] = {"lambda": [mpmath.nstr(v, dps) for v in lam_mp]}
    return Iet(loop.start, lam, meta=meta)


def golden_iet(dps: int | None = None) -> Iet:
    return periodic_iet(golden_loop(), dps)


def expanding_direction(loop: RotationPath, index: int = 1) -> np.ndarray:
    """Real eigenvector (unit 1-norm, first nonzero entry positive) of the
    period matrix for its ``index``-th largest eigenvalue."""
    A = np.array(path_matrix(loop), dtype=float)
    vals, vecs = np.linalg.eig(A)
    order = np.argsort(-np.abs(vals))
    k = order[index]
    if abs(vals[k].imag) > 1e-12:
        raise ConfigError("selected eigenvalue is not real")
    v = vecs[:, k].real
    v = v / np.abs(v).sum()
    nz = v[np.abs(v) > 1e-12]
    return v if nz[0] > 0 else -v


def divergent_aiet(loop: RotationPath, w, periods: int = 12, dps: int = 80) -> Aiet:
    """Affine interval exchange with log-slopes ``w`` whose induction
    follows ``loop`` for at least ``periods`` passes.

    The lengths are pulled back from level ``periods * len(loop)``, where
    any positive length vector compatible with the transported slopes is a
    valid choice, by inverting the Rauzy steps; every inverse step is
    automatically consistent with the prescribed winner.  The result
    stores its lengths at ``dps`` digits in ``meta["exact"]``.
    """
    d = loop.start.d
    arrows = list(loop.arrows) * periods
    with mpmath.workdps(dps):
        om = [mpmath.mpf(float(x)) for x in w]
        history = []
        for arrow in arrows:
            history.append(list(om))
            wi, li = arrow.winner - 1, arrow.loser - 1
            om[li] = om[li] + om[wi]
        c = [mpmath.expm1(x) for x in om]
        pos = [j for j in range(d) if c[j] > 0]
        neg = [j for j in range(d) if c[j] < 0]
        if not pos or not neg:
            raise ConfigError("transported slopes admit no balanced lengths")
        lam = [mpmath.mpf(1)] * d
        for j in pos:
            lam[j] = 1 / (len(pos) * c[j])
        for j in neg:
            lam[j] = -1 / (len(neg) * c[j])
        for arrow, om_k in zip(reversed(arrows), reversed(history)):
            wi, li = arrow.winner - 1, arrow.loser - 1
            if arrow.move is Move.TOP:
                lam[wi] = lam[wi] + mpmath.exp(om_k[li]) * lam[li]
            else:
                lam[li] = lam[li] * mpmath.exp(om_k[wi])
                lam[wi] = lam[wi] + lam[li] * mpmath.exp(-om_k[wi])
            s = sum(lam)
            lam = [v / s for v in lam]
        w_mp = [mpmath.mpf(float(x)) for x in w]
        balance = sum(mpmath.exp(a) * b for a, b in zip(w_mp, lam)) - 1
        if abs(balance) > mpmath.mpf(10) ** (-(dps // 2)):
            raise ConfigError("pulled-back lengths lost the bottom partition identity")
        exact = {"lambda": [mpmath.nstr(v, dps) for v in lam],
                 "omega": [mpmath.nstr(v, dps) for v in w_mp]}
    lam_f = np.array([float(v) for v in lam])
    lam_f /= lam_f.sum()
    w_f = np.asarray(w, dtype=float)
    # float rounding can break the identity at the last digit; absorb it
    om_f = w_f - math.log(float(np.exp(w_f) @ lam_f))
    meta = {"exact": exact, "loop": loop.to_dict(), "periods": periods, "w": w_f.tolist()}
    return Aiet(loop.start, lam_f, om_f, meta=meta)


def _forced_history(T: Giet, arrows, dps: int, lam0=None):
    """Log-slopes and profile parameters before each arrow when the
    induction of ``T`` is forced along ``arrows`` (lengths may turn
    negative while the guess is poor; only the records matter)."""
    from .renorm import exact_parameters

    lam, om = exact_parameters(T, dps)
    if lam0 is not None:
        lam = list(lam0)
    la = [mpmath.mpf(-float(u)) / 2 for u in T.moebius_u]
    hist = []
    for arrow in arrows:
        hist.append((list(om), list(la)))
        w, l = arrow.winner - 1, arrow.loser - 1
        if arrow.move is Move.TOP:
            cut = lam[l] * mpmath.exp(om[l])
            s = (lam[w] - cut) / lam[w]
            lam[w] = lam[w] - cut
        else:
            x = lam[l] * mpmath.exp(-om[w])
            rest = x / lam[w]
            den = 1 + mpmath.expm1(la[w]) * rest
            s = (1 - rest) / den
            lam[l] = mpmath.exp(la[w]) * x / den
            lam[w] = lam[w] - lam[l]
        s = min(max(s, 0), 1)  # keep the record finite for poor guesses
        log_d = mpmath.log1p(mpmath.expm1(la[w]) * s)
        om_w = om[w]
        om[w] = om_w + la[w] - log_d
        om[l] = om[l] + om_w - log_d
        la[l] = la[l] + la[w] - log_d
        la[w] = log_d
        total = sum(lam)
        lam = [v / total for v in lam]
    return hist, om


def _balanced_lengths(om):
    c = [mpmath.expm1(x) for x in om]
    pos = [j for j in range(len(om)) if c[j] > 0]
    neg = [j for j in range(len(om)) if c[j] < 0]
    if not pos or not neg:
        raise ConfigError("transported slopes admit no balanced lengths")
    lam = [mpmath.mpf(1)] * len(om)
    for j in pos:
        lam[j] = 1 / (len(pos) * c[j])
    for j in neg:
        lam[j] = -1 / (len(neg) * c[j])
    return lam


def _pull_back(arrows, hist, lam):
    for arrow, (om, la) in zip(reversed(arrows), reversed(hist)):
        wi, li = arrow.winner - 1, arrow.loser - 1
        if arrow.move is Move.TOP:
            lam[wi] = lam[wi] + mpmath.exp(om[li]) * lam[li]
        else:
            lam[wi] = lam[wi] + lam[li]
            a = mpmath.exp(la[wi])
            x = lam[li] / (a - (a - 1) * lam[li] / lam[wi])
            lam[li] = x * mpmath.exp(om[wi])
        s = sum(lam)
        lam = [v / s for v in lam]
    return lam


def loop_following(T: Giet, loop: RotationPath, periods: int = 12, dps: int = 200,
                   max_iter: int = 60) -> Giet:
    """Adjust the lengths of ``T`` (Moebius or affine profiles), keeping
    its log-slopes and profiles, so that its induction follows ``loop``
    for ``periods`` passes.

    Alternates a forced forward pass, which records the log-slopes and
    profile parameters met along the loop, with a backward pass that
    rebuilds the lengths from those records.  For affine maps one round
    is exact.
    """
    with mpmath.workdps(dps):
        lam = None
        tol = mpmath.mpf(10) ** (-(dps - 20))
        # continuation in the depth keeps every forced pass close to a
        # genuine orbit
        for depth in range(1, periods + 1):
            arrows = list(loop.arrows) * depth
            for _ in range(max_iter):
                hist, om_end = _forced_history(T, arrows, dps, lam)
                new = _pull_back(arrows, hist, _balanced_lengths(om_end))
                done = lam is not None and max(abs(x - y) for x, y in zip(new, lam)) < tol
                lam = new
                if done:
                    break
            else:
                raise ConfigError(f"loop-following lengths did not converge at depth {depth}")
        om0 = [mpmath.mpf(float(x)) for x in T.omega]
        balance = sum(mpmath.exp(a) * b for a, b in zip(om0, lam)) - 1
        if abs(balance) > mpmath.mpf(10) ** (-(dps // 2)):
            raise ConfigError("adjusted lengths lost the bottom partition identity")
        exact = {"lambda": [mpmath.nstr(v, dps) for v in lam],
                 "omega": [mpmath.nstr(v, dps) for v in om0]}
    lam_f = np.array([float(v) for v in lam])
    lam_f /= lam_f.sum()
    om_f = T.omega - math.log(float(np.exp(T.omega) @ lam_f))
    meta = dict(T.meta)
    meta.update({"exact": exact, "loop": loop.to_dict(), "periods": periods})
    return Giet(T.pi, lam_f, om_f, T.profiles, meta=meta)


def moebius_conjugate(T0: Giet, u: float) -> Giet:
    """``m_u o T0 o m_u^{-1}``."""
    T = conjugate(T0, diffeo.Moebius(u))
    if "loop" in T0.meta:
        T.meta["loop"] = T0.meta["loop"]
    return T


def perturb_profiles(T: Giet, eps: float, pattern=None) -> Giet:
    """Same shape as ``T`` with Moebius profiles ``eps * pattern``."""
    d = T.d
    pattern = np.array([(-1) ** j for j in range(d)], dtype=float) if pattern is None else np.asarray(pattern)
    out = with_moebius(T, eps * pattern)
    out.meta.update(T.meta)
    return out


def random_lengths(rng: np.random.Generator, d: int) -> np.ndarray:
    return rng.dirichlet(np.ones(d))


def random_permutation(rng: np.random.Generator, d: int) -> PermutationPair:
    while True:
        bottom = tuple(int(x) + 1 for x in rng.permutation(d))
        pi = PermutationPair(tuple(range(1, d + 1)), bottom)
        if is_irreducible(pi):
            return pi


def random_iet(rng: np.random.Generator, d: int, pi: PermutationPair | None = None) -> Iet:
    pi = random_permutation(rng, d) if pi is None else pi
    return Iet(pi, random_lengths(rng, d))


def random_aiet(rng: np.random.Generator, d: int, scale: float = 0.3) -> Aiet:
    from .giet import affine_from_slopes

    pi = random_permutation(rng, d)
    return affine_from_slopes(pi, random_lengths(rng, d), scale * rng.standard_normal(d))


def random_moebius_giet(rng: np.random.Generator, d: int, scale: float = 0.3,
                        u_scale: float = 0.5) -> Giet:
    shape = random_aiet(rng, d, scale)
    return with_moebius(shape, u_scale * rng.standard_normal(d))


def random_path(rng: np.random.Generator, pi: PermutationPair, zorich_steps: int,
                stay: float = 0.5) -> list:
    """Random Rauzy arrows from ``pi`` covering ``zorich_steps`` complete
    Zorich steps (the run after the last one has started)."""
    arrows, move, runs = [], Move.TOP if rng.random() < 0.5 else Move.BOTTOM, 1
    while True:
        arrow = rauzy_move(pi, move)
        arrows.append(arrow)
        pi = arrow.target
        if rng.random() >= stay:
            move = Move.BOTTOM if move is Move.TOP else Move.TOP
            runs += 1
            if runs > zorich_steps:
                arrows.append(rauzy_move(pi, move))
                return arrows


def random_path_aiet(rng: np.random.Generator, d: int, zorich_steps: int = 20,
                     scale: float = 0.3, stay: float = 0.3, dps: int = 60,
                     tries: int = 200) -> Aiet:
    """Affine interval exchange whose induction follows a random Rauzy path
    for ``zorich_steps`` Zorich steps; ``scale = 0`` gives a standard one.

    The log-slopes are drawn from the span of the non-expanding singular
    directions of the path's cocycle so that they stay moderate along the
    path.  Lengths are then pulled back from the end of the path, where
    every length vector compatible with the transported log-slopes is
    admissible.
    """
    for _ in range(tries):
        pi = random_permutation(rng, d)
        arrows = random_path(rng, pi, zorich_steps, stay)
        q = np.array(intmat.product([elementary_matrix(a) for a in arrows], d), dtype=float)
        _, sv, vt = np.linalg.svd(q)
        slow = vt[sv <= 1.0 + 1e-9]
        w = scale * (slow.T @ rng.standard_normal(slow.shape[0])) if slow.size else np.zeros(d)
        with mpmath.workdps(dps):
            om = [mpmath.mpf(float(x)) for x in w]
            hist = []
            for arrow in arrows:
                hist.append((list(om), [mpmath.mpf(0)] * d))
                om[arrow.loser - 1] += om[arrow.winner - 1]
            if scale == 0:
                end = [mpmath.mpf(float(x)) for x in random_lengths(rng, d)]
            else:
                try:
                    end = _balanced_lengths(om)
                except ConfigError:
                    continue
            lam = _pull_back(arrows, hist, end)
        lam_f = np.array([float(v) for v in lam])
        lam_f /= lam_f.sum()
        if scale == 0:
            return Iet(pi, lam_f)
        om_f = w - math.log(float(np.exp(w) @ lam_f))
        return Aiet(pi, lam_f, om_f)
    raise ConfigError(f"no admissible path found in {tries} tries")


FIXTURE_KEYS = {
    "golden": set(),
    "d4-periodic": set(),
    "divergent-aiet": {"periods"},
    "perturbed-aiet": {"eps", "periods"},
    "moebius-conjugate": {"base", "u"},
    "random-iet": {"d", "symmetric"},
    "random-aiet": {"d", "scale"},
    "random-moebius": {"d", "scale", "u_scale"},
    "random-path": {"d", "scale", "u", "zorich_steps"},
}


def fixture_loop(T: Giet) -> RotationPath | None:
    """The closed Rauzy path a fixture was built from, if any."""
    data = T.meta.get("loop")
    if not data:
        return None
    pi = PermutationPair.from_dict(data["start"])
    return RotationPath.from_moves(pi, data["moves"])


def build_fixture(desc: dict, seed: int = 0, dps: int = 60) -> Giet:
    """Build a map from a JSON description.

    ``{"fixture": name, ...}`` selects a named construction (see
    :data:`FIXTURE_KEYS` for the accepted parameters); anything else is
    read as a serialized map.  Random fixtures draw from ``seed``.
    """
    from .giet import giet_from_dict

    if "fixture" not in desc:
        return giet_from_dict(desc)
    name = desc["fixture"]
    if name not in FIXTURE_KEYS:
        raise ConfigError(f"unknown fixture {name!r}; known: {', '.join(sorted(FIXTURE_KEYS))}")
    extra = set(desc) - FIXTURE_KEYS[name] - {"fixture"}
    if extra:
        raise ConfigError(f"unknown keys for fixture {name!r}: {', '.join(sorted(extra))}")
    rng = np.random.default_rng(seed)
    build_dps = max(dps, 200)
    if name == "golden":
        return golden_iet(dps)
    if name == "d4-periodic":
        return periodic_iet(d4_loop(), dps)
    if name == "divergent-aiet":
        loop = d4_loop()
        return divergent_aiet(loop, expanding_direction(loop), int(desc.get("periods", 12)), build_dps)
    if name == "perturbed-aiet":
        loop = d4_loop()
        base = divergent_aiet(loop, expanding_direction(loop), 12, build_dps)
        eps = float(desc.get("eps", 1e-3))
        return loop_following(perturb_profiles(base, eps), loop, int(desc.get("periods", 10)), build_dps)
    if name == "moebius-conjugate":
        base = desc.get("base", "golden")
        if base not in ("golden", "d4-periodic"):
            raise ConfigError("moebius-conjugate base must be golden or d4-periodic")
        T0 = golden_iet(dps) if base == "golden" else periodic_iet(d4_loop(), dps)
        return moebius_conjugate(T0, float(desc.get("u", 0.5)))
    d = int(desc.get("d", 4))
    if name == "random-iet":
        pi = symmetric_pair(d) if desc.get("symmetric", False) else None
        return random_iet(rng, d, pi)
    if name == "random-path":
        T = random_path_aiet(rng, d, int(desc.get("zorich_steps", 20)), float(desc.get("scale", 0.3)))
        u = float(desc.get("u", 0.0))
        return moebius_conjugate(T, u) if u else T
    if name == "random-aiet":
        return random_aiet(rng, d, float(desc.get("scale", 0.3)))
    return random_moebius_giet(rng, d, float(desc.get("scale", 0.3)), float(desc.get("u_scale", 0.5)))


__all__ = [
    "golden_loop", "d4_loop", "golden_iet", "periodic_iet", "divergent_aiet",
    "expanding_direction", "moebius_conjugate", "perturb_profiles", "random_iet",
    "random_aiet", "random_moebius_giet", "loop_following", "zorich_period", "zorich_blocks", "loop_from_moves",
    "build_fixture", "fixture_loop", "random_path", "random_path_aiet",
]
