"""Lyapunov spectrum, Oseledets splitting estimates and the Diophantine
series diagnostics of a Zorich cocycle given as a list of integer
matrices ``Z_0, Z_1, ...`` (``Z_n`` maps level ``n`` heights to level
``n + 1`` heights).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import intmat
from .errors import ConfigError, DegenerateFrame, MissingSplitting, WindowTooShort

EPS = np.finfo(float).eps


def _float_mats(mats) -> list[np.ndarray]:
    return [m if isinstance(m, np.ndarray) else intmat.to_float(m) for m in mats]


@dataclass
class LyapunovEstimate:
    thetas: np.ndarray
    n_steps: int
    trace: list[tuple[int, list[float]]]
    method: str = "qr"

    def to_dict(self) -> dict:
        return {"thetas": self.thetas.tolist(), "n_steps": self.n_steps,
                "method": self.method,
                "trace": [{"n": n, "thetas": t} for n, t in self.trace]}


def lyapunov_spectrum(matrices, N: int | None = None, every: int = 100,
                      min_steps: int = 500) -> LyapunovEstimate:
    """Exponents per step by QR re-orthonormalization of a pushed frame."""
    mats = list(matrices)
    N = len(mats) if N is None else N
    if N < min_steps:
        raise ConfigError(f"need at least {min_steps} steps, got {N}")
    if len(mats) < N:
        raise ConfigError("matrix stream shorter than N")
    d = len(mats[0])
    frame = np.eye(d)
    acc = np.zeros(d)
    trace = []
    for k, z in enumerate(_float_mats(mats[:N]), start=1):
        frame, r = np.linalg.qr(z @ frame)
        diag = np.abs(np.diag(r))
        if not np.all(np.isfinite(diag)) or np.any(diag <= np.finfo(float).tiny):
            raise DegenerateFrame(f"frame collapsed at step {k}")
        acc += np.log(diag)
        if k % every == 0:
            trace.append((k, sorted((acc / k).tolist(), reverse=True)))
    return LyapunovEstimate(np.sort(acc / N)[::-1], N, trace)


def push_frame(mats, frame: np.ndarray):
    """Push an orthonormal frame through ``mats`` in order.

    Returns the final orthonormal frame, the accumulated log diagonal of
    the triangular factors and the list of those factors.
    """
    f = np.array(frame, dtype=float)
    logs = np.zeros(f.shape[1])
    factors = []
    for z in mats:
        f, r = np.linalg.qr(z @ f)
        sgn = np.sign(np.diag(r))
        sgn[sgn == 0] = 1.0
        f = f * sgn
        r = (r.T * sgn).T
        factors.append(r)
        logs += np.log(np.abs(np.diag(r)))
    return f, logs, factors


def _inverse_float(m) -> np.ndarray:
    return np.linalg.inv(m if isinstance(m, np.ndarray) else intmat.to_float(m))


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles (radians) between the column spans of ``a`` and ``b``."""
    if a.shape[1] == 0 or b.shape[1] == 0:
        return np.array([math.pi / 2])
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    s = np.clip(np.linalg.svd(qa.T @ qb, compute_uv=False), -1.0, 1.0)
    return np.arccos(s)


def min_angle(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.min(principal_angles(a, b)))


@dataclass
class SplittingEstimate:
    at_step: int
    gamma_s: np.ndarray
    gamma_c: np.ndarray
    gamma_u: np.ndarray
    window: int
    gap_u: float  # accumulated log singular gap resolving the unstable space
    gap_s: float
    central_fallback: bool = False
    notes: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.gamma_s.shape[0]

    def basis(self) -> np.ndarray:
        return np.hstack([self.gamma_s, self.gamma_c, self.gamma_u])

    def projections(self) -> dict[str, np.ndarray]:
        """Oblique projections onto each subspace along the other two."""
        b = self.basis()
        inv = np.linalg.inv(b)
        gs, gc = self.gamma_s.shape[1], self.gamma_c.shape[1]
        out = {}
        for name, sl in (("s", slice(0, gs)), ("c", slice(gs, gs + gc)),
                         ("u", slice(gs + gc, None))):
            out[name] = b[:, sl] @ inv[sl, :]
        return out

    def min_angle(self) -> float:
        spaces = [s for s in (self.gamma_s, self.gamma_c, self.gamma_u) if s.shape[1]]
        return min(min_angle(x, y) for i, x in enumerate(spaces) for y in spaces[i + 1:])

    def to_dict(self) -> dict:
        return {"at_step": self.at_step, "window": self.window,
                "gamma_s": self.gamma_s.tolist(), "gamma_c": self.gamma_c.tolist(),
                "gamma_u": self.gamma_u.tolist(), "gap_u": self.gap_u,
                "gap_s": self.gap_s, "central_fallback": self.central_fallback}


def _top_subspace(mats, d, k, seed):
    """Leading ``k``-dimensional subspace of the product of ``mats`` (in
    order), obtained by pushing a generic frame, with the per-direction
    log-stretch of the full frame."""
    rng = np.random.default_rng(seed)
    frame, _ = np.linalg.qr(rng.standard_normal((d, d)))
    f, logs, _ = push_frame(mats, frame)
    return f[:, :k], logs, f


def oseledets_spaces(matrices, n: int, N: int, g: int, kappa: int, past=None,
                     seed: int = 0, min_gap: float = math.log(1e3)) -> SplittingEstimate:
    """Splitting estimate at step ``n``.

    The unstable space is the leading ``g``-subspace of ``Q(n - N, n)``
    (its left singular subspace), reaching into ``past`` (matrices with
    negative indices, ``past[-1] = Z_{-1}``) when ``n < N``.  The stable
    space is the trailing ``g``-subspace of ``Q(n, n + N)`` on the right,
    computed as the leading subspace of the inverse product.  The central
    space is the intersection of the two ``(g + kappa - 1)``-subspaces.
    """
    mats = list(matrices)
    past = list(past or [])
    d = len(mats[0])
    c = kappa - 1
    if 2 * g + c != d:
        raise ConfigError("dimensions g, kappa - 1, g do not add up to d")
    if n + N > len(mats):
        raise WindowTooShort(f"forward window {n}+{N} beyond orbit of length {len(mats)}")
    full = past + mats
    lo = n - N + len(past)
    if lo < 0:
        raise WindowTooShort(f"backward window reaches before the available past at step {n}")
    back = _float_mats(full[lo : n + len(past)])
    fwd_inv = [_inverse_float(m) for m in reversed(mats[n : n + N])]
    u_big, logs_u, fu = _top_subspace(back, d, g + c, seed)
    s_big, logs_s, fs = _top_subspace(fwd_inv, d, g + c, seed + 1)
    gu = fu[:, :g]
    gs = fs[:, :g]
    srt_u = np.sort(logs_u)[::-1]
    srt_s = np.sort(logs_s)[::-1]
    gap_u = float(srt_u[g - 1] - srt_u[g])
    gap_s = float(srt_s[g - 1] - srt_s[g])
    if min(gap_u, gap_s) < min_gap:
        raise WindowTooShort(
            f"singular gaps {gap_u:.3g}, {gap_s:.3g} below {min_gap:.3g} with window {N}")
    fallback = False
    if c == 0:
        gcen = np.zeros((d, 0))
    else:
        qa, _ = np.linalg.qr(u_big)
        qb, _ = np.linalg.qr(s_big)
        uu, sv, _ = np.linalg.svd(qa.T @ qb)
        gcen = qa @ uu[:, :c]
        if sv[c - 1] < 1.0 - 1e-6:
            # no clean intersection: middle directions of the backward window
            fallback = True
            gcen = fu[:, g : g + c]
    return SplittingEstimate(n, gs, gcen, gu, N, gap_u, gap_s, fallback)


def unstable_transport(matrices, start_frame: np.ndarray, times):
    """Push ``start_frame`` (basis of the unstable space at step 0) along
    the orbit and record, at each requested time, the orthonormal frame
    and the triangular factor product needed to pull vectors back."""
    mats = _float_mats(matrices)
    times = sorted(set(times))
    out = {}
    f = np.array(start_frame, dtype=float)
    f, _ = np.linalg.qr(f)
    factors = []
    t_idx = 0
    for n in range(max(times) + 1 if times else 0):
        if n == times[t_idx]:
            out[n] = (f.copy(), list(factors))
            t_idx += 1
            if t_idx == len(times):
                break
        f, r = np.linalg.qr(mats[n] @ f)
        factors.append(r)
    return out


def pull_back(coeffs: np.ndarray, factors) -> np.ndarray:
    """Solve ``R_n ... R_1 x = coeffs`` by successive triangular solves."""
    x = np.array(coeffs, dtype=float)
    for r in reversed(factors):
        x = np.linalg.solve(r, x)
    return x


def restricted_norm(m: np.ndarray, basis: np.ndarray) -> float:
    """``max_b ||m b||_1 / ||b||_1`` over the orthonormal basis vectors ``b``."""
    if basis.shape[1] == 0:
        return 0.0
    return float(max(np.abs(m @ b).sum() / np.abs(b).sum() for b in basis.T))


@dataclass
class RdcReport:
    k_m: list[int]
    series_B: list[float]
    series_F: list[float]
    terms_B: list[list[float]]
    terms_F: list[list[float]]
    subexp_stat: list[float]
    min_angles: list[float]
    delta_hat: float
    fitted_ratio_B: float
    fitted_ratio_F: float
    tail_bound_F: float
    hyperbolic: bool

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=float)


def _transported_norm(basis: np.ndarray, blocks) -> float:
    """``max_b ||M b||_1 / ||b||_1`` for ``M`` the product of the block
    matrices, pushing one block at a time and projecting back onto the
    invariant target space so that roundoff along other directions does
    not grow."""
    if basis.shape[1] == 0:
        return 0.0
    v = basis.copy()
    for m, p in blocks:
        v = p @ (m @ v)
    return float(max(np.abs(v[:, i]).sum() / np.abs(basis[:, i]).sum()
                     for i in range(basis.shape[1])))


def _geometric_ratio(terms) -> float:
    t = np.asarray([x for x in terms if x > 0], dtype=float)
    if t.size < 3:
        return float("nan")
    k = np.arange(t.size)
    slope = np.polyfit(k, np.log(t), 1)[0]
    return float(math.exp(slope))


def rdc_report(matrices, good_times, splittings: dict, k_m=None) -> RdcReport:
    """Series ``[B]``, ``[F]``, ``[S]`` and ``[A]`` along good returns.

    ``good_times`` are Zorich times ``n_k``; the accelerated matrices are
    ``Z~_k = Q(n_k, n_{k+1})``.  ``splittings`` maps each ``n_k`` to its
    :class:`SplittingEstimate`.
    """
    mats = list(matrices)
    times = list(good_times)
    missing = [n for n in times if n not in splittings]
    if missing:
        raise MissingSplitting(f"no splitting estimate at steps {missing[:5]}")
    K = len(times)
    if K < 3:
        raise MissingSplitting("need at least three good returns")
    d = len(mats[0])
    acc = [intmat.to_float(intmat.product(mats[times[k] : times[k + 1]], d))
           for k in range(K - 1)]
    acc_norm = [float(np.abs(a).sum()) for a in acc]
    proj = {n: splittings[n].projections() for n in times}
    k_m = list(range(1, K - 1)) if k_m is None else list(k_m)
    inv = [np.linalg.inv(a) for a in acc]
    series_B, series_F, terms_B, terms_F = [], [], [], []
    for km in k_m:
        tb = []
        for k in range(1, km + 1):
            gs = splittings[times[k]].gamma_s
            blocks = [(acc[j], proj[times[j + 1]]["s"]) for j in range(k, km)]
            tb.append(_transported_norm(gs, blocks) * np.abs(proj[times[k]]["s"]).sum()
                      * acc_norm[k - 1])
        tf = []
        for k in range(km + 1, K):
            gu = splittings[times[k]].gamma_u
            blocks = [(inv[j], proj[times[j]]["u"]) for j in range(k - 1, km - 1, -1)]
            tf.append(_transported_norm(gu, blocks) * np.abs(proj[times[k]]["u"]).sum()
                      * acc_norm[k - 1])
        terms_B.append(tb)
        terms_F.append(tf)
        series_B.append(float(np.sum(tb)))
        series_F.append(float(np.sum(tf)))
    subexp = [math.log(acc_norm[km]) / m for m, km in enumerate(k_m, start=1) if km < K - 1]
    angles = [splittings[times[km]].min_angle() for km in k_m]
    # decay of the summands as k moves away from k_m
    ratio_B = _geometric_ratio(terms_B[-1][::-1]) if terms_B else float("nan")
    ratio_F = _geometric_ratio(terms_F[0]) if terms_F else float("nan")
    tail = float("nan")
    if terms_F and terms_F[0] and ratio_F == ratio_F and ratio_F < 1:
        tail = terms_F[0][-1] * ratio_F / (1 - ratio_F)
    hyper = bool(ratio_B == ratio_B and ratio_F == ratio_F and ratio_B < 1 and ratio_F < 1)
    return RdcReport(k_m, series_B, series_F, terms_B, terms_F, subexp, angles,
                     float(min(angles)), ratio_B, ratio_F, tail, hyper)


def forward_splitting(matrices, N: int, g: int, kappa: int, seed: int = 0) -> SplittingEstimate:
    """Splitting at step 0 when no past is available.

    The stable and central spaces only depend on the future and are
    estimated as in :func:`oseledets_spaces`; the unstable space is taken
    as their orthogonal complement, which fixes the shadow only modulo
    stable and central directions.  The estimate is flagged in ``notes``.
    """
    mats = list(matrices)
    d = len(mats[0])
    c = kappa - 1
    if 2 * g + c != d:
        raise ConfigError("dimensions g, kappa - 1, g do not add up to d")
    if N > len(mats):
        raise WindowTooShort(f"forward window {N} beyond orbit of length {len(mats)}")
    fwd_inv = [_inverse_float(m) for m in reversed(mats[:N])]
    _, logs_s, fs = _top_subspace(fwd_inv, d, g + c, seed + 1)
    srt = np.sort(logs_s)[::-1]
    gap_s = float(srt[g - 1] - srt[g]) if g < d else math.inf
    slow = fs[:, : g + c]
    gs = fs[:, :g]
    gcen = fs[:, g : g + c]
    full, _ = np.linalg.qr(np.hstack([slow, np.eye(d)]))
    gu = full[:, g + c : d]
    return SplittingEstimate(0, gs, gcen, gu, N, float("nan"), gap_s, c > 0,
                             {"unstable": "orthogonal complement of the forward slow space"})
