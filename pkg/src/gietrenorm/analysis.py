"""Diagnostics built on renormalization: distortion, special Birkhoff
sums, distances to the affine and standard families, mesh decay,
wandering-interval detection and reconstruction of the conjugacy to a
standard interval exchange."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import diffeo, kernel
from .errors import ConfigError, FloorBudgetExceeded, NotRecurrent
from .giet import Giet, Iet
from .renorm import (
    FLOOR_BUDGET,
    Induction,
    LengthOrbit,
    RenormState,
    WordEvaluator,
    partition,
)

R2_MIN = 0.9


# ---------------------------------------------------------------------------
# observables

@dataclass
class PiecewiseObservable:
    """Either one constant per letter (``values``) or a function on [0, 1]
    evaluated pointwise (``func``; vectorized)."""

    values: np.ndarray | None = None
    func: object = None

    def __post_init__(self):
        if (self.values is None) == (self.func is None):
            raise ConfigError("give exactly one of values or func")
        if self.values is not None:
            self.values = np.asarray(self.values)

    @property
    def piecewise_constant(self) -> bool:
        return self.values is not None

    def at(self, T: Giet, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.values is not None:
            return self.values[T.locate(x) - 1]
        return np.asarray(self.func(x), dtype=float)


def log_derivative_observable(T: Giet) -> PiecewiseObservable:
    def f(x):
        x = np.atleast_1d(x)
        letters = T.locate(x)
        out = np.empty_like(x)
        for a in np.unique(letters):
            sel = letters == a
            out[sel] = np.log(T.branch_jet(int(a), x[sel], 1)[1])
        return out

    return PiecewiseObservable(func=f)


def _evaluator(state: Induction) -> WordEvaluator:
    return state.ev if isinstance(state, RenormState) else WordEvaluator(state.base)


def _base_ends(state: Induction):
    if isinstance(state, RenormState):
        L, R, _, _ = state.float_endpoints()
        return np.asarray(L), np.asarray(R)
    a = state.a_n
    lam = state.lambda_n
    L = np.zeros(state.d)
    acc = 0.0
    for letter in state.pi.top:
        L[letter - 1] = acc * a
        acc += lam[letter - 1]
    return L, L + a * lam


def _words(state: Induction):
    words = getattr(state, "words", None)
    if words is None:
        raise ConfigError("this diagnostic needs an orbit that tracks words")
    return words


# ---------------------------------------------------------------------------
# special Birkhoff sums

def special_birkhoff_sums(state: Induction, f: PiecewiseObservable, points: int = 33):
    """``f^(n)`` of the current level.

    For piecewise-constant ``f`` returns the integer/float vector obtained
    by summing ``f`` along each word.  Otherwise returns, per letter, the
    pair ``(x, f^(n)(x))`` on ``points`` interior points of the base
    interval.
    """
    words = _words(state)
    T = state.base
    if f.piecewise_constant:
        return np.array([f.values[w].sum() for w in words])
    ev = _evaluator(state)
    L, R = _base_ends(state)
    out = []
    for j, w in enumerate(words):
        xs = L[j] + (R[j] - L[j]) * (np.arange(1, points + 1) / (points + 1))
        sums = np.empty(points)
        for k, x0 in enumerate(xs):
            orbit = ev.trace(w[:-1], x0)
            sums[k] = f.at(T, orbit).sum()
        out.append((xs, sums))
    return out


def special_log_derivative_sums(state: Induction, points: int = 33):
    """``log D(T^{q_j})`` on interior points of each base interval, from
    the compiled jets."""
    ev = _evaluator(state)
    L, R = _base_ends(state)
    out = []
    for j, w in enumerate(_words(state)):
        xs = L[j] + (R[j] - L[j]) * (np.arange(1, points + 1) / (points + 1))
        out.append((xs, ev.jets(w, xs)[1]))
    return out


@dataclass
class BirkhoffSum:
    direct: float
    decomposed: float
    difference: float
    level: int
    pieces: list[tuple[str, int, float]]  # (kind, length, value)


def birkhoff_sum(T: Giet, f: PiecewiseObservable, x: float, r: int,
                 state: Induction | None = None) -> BirkhoffSum:
    """``S_r f(x)`` by plain iteration and through the towers of ``state``.

    The decomposition walks the orbit: a direct prefix until the first
    visit to the base, then whole special sums while they fit into the
    remaining length, then a direct suffix.
    """
    if r == 0:
        return BirkhoffSum(0.0, 0.0, 0.0, 0, [])
    orbit = np.empty(r + 1)
    orbit[0] = x
    for k in range(r):
        T.check_singular(orbit[k])
        orbit[k + 1] = T(np.array([orbit[k]]))[0]
    vals = f.at(T, orbit[:r])
    direct = float(vals.sum())
    if state is None:
        return BirkhoffSum(direct, direct, 0.0, 0, [("direct", r, direct)])
    words = _words(state)
    L, R = _base_ends(state)
    bound = float(R.max()) if isinstance(state, LengthOrbit) else float(state.a_n)
    special = special_birkhoff_sums(state, f) if f.piecewise_constant else None
    ev = _evaluator(state)
    pieces = []
    k = 0
    while k < r and not orbit[k] < bound:
        k += 1
    if k:
        pieces.append(("direct", k, float(vals[:k].sum())))
    total = sum(p[2] for p in pieces)
    while k < r:
        j = int(np.searchsorted(np.sort(L), orbit[k], side="right")) - 1
        letter = int(np.argsort(L)[j])
        q = len(words[letter])
        if k + q > r:
            break
        if special is not None:
            val = float(special[letter])
        else:
            tr = ev.trace(words[letter][:-1], orbit[k])
            val = float(f.at(T, tr).sum())
        pieces.append(("special", q, val))
        total += val
        k += q
    if k < r:
        tail = float(vals[k:].sum())
        pieces.append(("direct", r - k, tail))
        total += tail
    return BirkhoffSum(direct, total, direct - total, state.n, pieces)


# ---------------------------------------------------------------------------
# distortion

@dataclass
class DistortionReport:
    max_ratio: float
    bound: float
    samples: int
    level: int

    @property
    def ok(self) -> bool:
        return self.max_ratio <= self.bound * (1.0 + 1e-6)


def distortion_check(state: Induction, samples: int = 200, seed: int = 0) -> DistortionReport:
    """Ratios ``D(T^k)(x) / D(T^k)(y)`` for points of one base interval and
    ``k`` up to the tower height (the intermediate floors are disjoint),
    compared with ``exp |N|(T)``."""
    rng = np.random.default_rng(seed)
    T = state.base
    bound = math.exp(T.total_nonlinearity())
    ev = _evaluator(state)
    L, R = _base_ends(state)
    words = _words(state)
    worst = 1.0
    for _ in range(samples):
        j = int(rng.integers(state.d))
        k = int(rng.integers(1, len(words[j]) + 1))
        xs = L[j] + (R[j] - L[j]) * rng.uniform(0.0, 1.0, 2)
        ld = ev.jets(words[j][:k], xs)[1]
        worst = max(worst, math.exp(abs(float(ld[0] - ld[1]))))
    return DistortionReport(worst, bound, samples, state.n)


# ---------------------------------------------------------------------------
# distances

@dataclass
class Distances:
    d_eta_affine: float  # = |N|(T)
    d_eta_quadrature: float
    d_c1_standard: float
    schwarzian_proxy: float


def distances(T: Giet, grid: int = 257) -> Distances:
    ys = diffeo.chebyshev_nodes(grid)
    c1 = float(np.abs(T.omega).sum() + np.abs(T.lam - T.bottom_lam).sum())
    quad = 0.0
    schw = 0.0
    for p in T.profiles:
        jet = p._jet(ys, 3)
        c1 += float(np.max(np.abs(jet[0] - ys)) + np.max(np.abs(jet[1] - 1.0)))
        quad += diffeo.nonlinearity_summary(p).total
        if not p.is_moebius:
            schw += float(np.max(np.abs(diffeo.schwarzian(p, ys))))
    return Distances(T.total_nonlinearity(), quad, c1, schw)


# ---------------------------------------------------------------------------
# fits

@dataclass
class Fit:
    slope: float
    intercept: float
    r2: float

    @property
    def accepted(self) -> bool:
        return self.r2 >= R2_MIN


def linear_fit(x, y) -> Fit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        return Fit(float("nan"), float("nan"), 0.0)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss if ss > 0 else 0.0
    return Fit(float(slope), float(intercept), r2)


# ---------------------------------------------------------------------------
# mesh decay

@dataclass
class MeshDecay:
    levels: list[int]
    mesh: list[float]
    fit: Fit
    alpha: float
    monotone: bool
    verdict: str  # "decay", "bounded-below" or "ambiguous"


def mesh_decay(orbit: Induction, steps: int, budget: int = FLOOR_BUDGET,
               floor: float = 1e-3) -> MeshDecay:
    """Mesh of the dynamical partition after each of ``steps`` Zorich
    steps, with a geometric fit of its decay."""
    levels, mesh = [], []
    for _ in range(steps):
        try:
            orbit.step_zorich()
        except FloorBudgetExceeded:
            break
        if sum(orbit.q) > budget:
            break
        levels.append(orbit.zorich_count)
        mesh.append(partition(orbit, budget, positions=False).mesh)
    return summarize_mesh(levels, mesh, floor)


def summarize_mesh(levels, mesh, floor: float = 1e-3) -> MeshDecay:
    """Geometric fit and verdict for a mesh trace."""
    levels, mesh = list(levels), list(mesh)
    fit = linear_fit(levels, np.log(mesh)) if mesh else Fit(float("nan"), float("nan"), 0.0)
    alpha = math.exp(fit.slope) if fit.slope == fit.slope else float("nan")
    monotone = all(b <= a * (1 + 1e-9) for a, b in zip(mesh, mesh[1:]))
    if mesh and min(mesh) >= floor:
        verdict = "bounded-below"
    elif fit.accepted and alpha < 1:
        verdict = "decay"
    else:
        verdict = "ambiguous"
    return MeshDecay(levels, mesh, fit, alpha, monotone, verdict)


# ---------------------------------------------------------------------------
# wandering intervals

@dataclass
class TowerProfile:
    level: int
    k0: list[int]  # argmax floor index per tower
    max_floor: list[float]
    tower_measure: list[float]
    concentration: list[float]  # tower measure / max floor
    log_ratios: list[np.ndarray] = field(repr=False, default_factory=list)


@dataclass
class WanderingReport:
    profiles: list[TowerProfile]
    C: list[float]  # max concentration per level
    distorted: bool
    gamma: float
    c: float
    fit: Fit
    C0: float
    mmy_holds: bool
    mesh: list[float]
    verdict: str


def tower_profile(orbit: Induction, budget: int = FLOOR_BUDGET) -> TowerProfile:
    part = partition(orbit, budget, positions=False)
    k0, mx, meas, conc, ratios = [], [], [], [], []
    for j in range(1, orbit.d + 1):
        tower = part.tower(j)
        k = int(np.argmax(tower))
        k0.append(k)
        mx.append(float(tower[k]))
        meas.append(float(tower.sum()))
        conc.append(float(tower.sum() / tower[k]))
        ratios.append(np.log(tower / tower[k]))
    return TowerProfile(orbit.n, k0, mx, meas, conc, ratios)


def floor_envelope(log_ratios: np.ndarray, k0: int, samples: int = 48):
    """Upper envelope ``max_{|i| >= r} log(|T^i F_0| / |F_0|)`` at
    log-spaced distances ``r`` from the largest floor."""
    idx = np.abs(np.arange(log_ratios.size) - k0)
    rmax = int(idx.max())
    if rmax < 1:
        return np.array([]), np.array([])
    order = np.argsort(idx)
    srt = log_ratios[order]
    env_all = np.maximum.accumulate(srt[::-1])[::-1]  # max over |i| >= idx
    dist = idx[order]
    r = np.unique(np.geomspace(1, rmax, samples).astype(int))
    pos = np.searchsorted(dist, r, side="left")
    return r.astype(float), env_all[pos]


def wandering_detect(orbit: Induction, steps: int, budget: int = FLOOR_BUDGET,
                     C_max: float = 1e3, persistence: int = 3,
                     stability: float = 2.0) -> WanderingReport:
    """Look for towers whose measure stays within ``C_max`` times their
    largest floor, persistently and with a stable constant, and fit the
    decay of the floors away from the largest one."""
    profiles, C, mesh = [], [], []
    for _ in range(steps):
        try:
            orbit.step_zorich()
        except FloorBudgetExceeded:
            break
        if sum(orbit.q) > budget:
            break
        prof = tower_profile(orbit, budget)
        profiles.append(prof)
        C.append(max(prof.concentration))
        mesh.append(max(prof.max_floor))
    # the final levels decide: early levels have short towers and small
    # concentration for every map
    tail = C[-persistence:]
    distorted = bool(len(tail) == persistence and max(tail) <= C_max
                     and max(tail) <= stability * min(tail))
    gamma = c = C0 = float("nan")
    fit = Fit(float("nan"), float("nan"), 0.0)
    mmy = False
    if profiles:
        last = profiles[-1]
        j = int(np.argmax(last.tower_measure))
        r, env = floor_envelope(last.log_ratios[j], last.k0[j])
        sel = env < 0
        if sel.sum() >= 3:
            fit = linear_fit(np.log(r[sel]), np.log(-env[sel]))
            gamma, c = fit.slope, math.exp(fit.intercept)
            s_all = last.log_ratios[j]
            idx = np.abs(np.arange(s_all.size) - last.k0[j])
            far = idx >= 1
            if gamma == gamma and gamma > 0:
                # smallest C0 with S_i <= C0 - |i|^gamma on the sampled range
                C0 = float(np.max(s_all[far] + idx[far] ** gamma))
                mmy = True
    if not fit.accepted and distorted:
        verdict = "ambiguous"
    else:
        verdict = "distorted" if distorted else "not-distorted"
    return WanderingReport(profiles, C, distorted, gamma, c, fit, C0, mmy, mesh, verdict)


# ---------------------------------------------------------------------------
# conjugacy reconstruction

@dataclass
class ConjugacyCandidate:
    x: np.ndarray
    phi: np.ndarray  # log of the invariant density, psi' = exp(phi)
    psi: np.ndarray
    defect: float
    bounds: list[float]  # nested base lengths used for the telescoping

    def __call__(self, y):
        return np.interp(y, self.x, self.psi)

    def distance_to(self, g) -> float:
        return float(np.max(np.abs(self.psi - g(self.x))))


def _backward_entry(T: Giet, y: np.ndarray, bound: float, max_steps: int):
    params = kernel.params_of(T)
    bcuts = np.concatenate([[0.0], np.cumsum([T.bottom_lam[b - 1] for b in T.pi.bottom])])
    bcuts[-1] = 1.0
    bottom = np.asarray(T.pi.bottom, dtype=np.int64) - 1
    if params is None:
        raise ConfigError("conjugacy reconstruction needs affine or Moebius profiles")
    x, steps, logs = kernel.backward_entry(np.ascontiguousarray(y, dtype=float), float(bound),
                                           *params, bcuts, bottom, max_steps)
    if np.any(steps < 0):
        raise ConfigError(f"backward orbit did not reach [0, {bound:.3g}) within {max_steps} steps")
    return x, logs


def reconstruct_conjugacy(T: Giet, T0: Iet, grid: int = 2**14, nodes: int = 48,
                          bounds=None, escape: float = 50.0,
                          max_steps: int = 10**8) -> ConjugacyCandidate:
    """Invariant density of ``T`` by telescoping log-derivatives along
    backward first-entry orbits into nested base intervals ``[0, b_k)``
    of renormalization levels, and the map ``psi`` with
    ``psi o T = T0 o psi``.

    On the deepest base the log-density is taken constant; on each
    shallower base it is a Chebyshev interpolant of values carried up
    from the next one.
    """
    if bounds is None:
        orbit = LengthOrbit(T) if T.moebius_u is not None else RenormState(T)
        bounds = []
        target = 1e-2
        for _ in range(400):
            orbit.step_zorich()
            if np.abs(orbit.omega_n()).sum() > escape:
                raise NotRecurrent("log-slopes exceeded the escape threshold")
            if orbit.a_n <= target:
                bounds.append(float(orbit.a_n))
                target = orbit.a_n * 1e-2
                if orbit.a_n < 1e-6:
                    break
    bounds = sorted(bounds, reverse=True)
    interp = lambda z: np.zeros_like(z)  # deepest level: constant
    for b_hi, b_lo in reversed(list(zip(bounds[:-1], bounds[1:]))):
        c = 0.5 * b_hi * (1 - np.cos(np.pi * (np.arange(nodes) + 0.5) / nodes))
        xe, logs = _backward_entry(T, c, b_lo, max_steps)
        vals = interp(xe) + logs
        coef = np.polynomial.chebyshev.chebfit(2 * c / b_hi - 1, vals, nodes - 1)
        interp = (lambda z, coef=coef, b=b_hi:
                  np.polynomial.chebyshev.chebval(2 * np.asarray(z) / b - 1, coef))
    x = np.linspace(0.0, 1.0, grid + 1)
    xe, logs = _backward_entry(T, x, bounds[0], max_steps)
    phi = interp(xe) + logs
    rho = np.exp(phi - phi.max())
    mass = integrate.trapezoid(rho, x)
    phi = np.log(rho / mass)
    psi = integrate.cumulative_trapezoid(np.exp(phi), x, initial=0.0)
    psi /= psi[-1]
    cand = ConjugacyCandidate(x, phi, psi, 0.0, list(bounds))
    inner = T.top_cuts[1:-1]
    ok = np.min(np.abs(x[:, None] - inner[None, :]), axis=1) > 1e-9
    ok &= x < 1.0
    lhs = cand(T(x[ok]))
    rhs = T0(cand(x[ok]))
    cand.defect = float(np.max(np.abs(lhs - rhs)))
    return cand


# ---------------------------------------------------------------------------
# non-linearity decrease

@dataclass
class NonlinearityProbe:
    ratio: float
    degenerate: bool
    trace: list[float]
    monotone: bool


def nonlinearity_decrease_probe(M: Giet, p: int, steps: int = 20) -> NonlinearityProbe:
    """``|N|`` after ``p`` Zorich steps relative to ``|N|(M)``, and the
    ``|N|`` trace over ``max(p, steps)`` steps."""
    orbit = LengthOrbit(M) if M.moebius_u is not None else RenormState(M)
    from .renorm import level_total_nonlinearity

    def level_n():
        if isinstance(orbit, LengthOrbit):
            return orbit.total_nonlinearity()
        return level_total_nonlinearity(orbit)

    trace = [level_n()]
    for _ in range(max(p, steps)):
        orbit.step_zorich()
        trace.append(level_n())
    n0 = trace[0]
    if n0 == 0.0:
        return NonlinearityProbe(1.0, True, trace, True)
    monotone = all(b <= a * (1 + 1e-9) + 1e-15 for a, b in zip(trace, trace[1:]))
    return NonlinearityProbe(trace[p] / n0, False, trace, monotone)


# ---------------------------------------------------------------------------
# level invariants

@dataclass
class LevelInvariants:
    levels: list[int]
    mean: list[float]
    total: list[float]
    boundary: list[list[float]]
    omega: list[list[float]]


def level_invariants(T: Giet, steps: int, tol: float = 1e-12) -> LevelInvariants:
    """``N-bar``, ``|N|`` and the boundary of each renormalization, from
    the word-based induced branches."""
    from .renorm import level_boundary, level_mean_nonlinearity, level_total_nonlinearity

    st = RenormState(T)
    out = LevelInvariants([], [], [], [], [])

    def record():
        out.levels.append(st.zorich_count)
        out.mean.append(level_mean_nonlinearity(st))
        out.total.append(level_total_nonlinearity(st, tol))
        out.boundary.append(level_boundary(st).values.tolist())
        out.omega.append(st.omega_n().tolist())

    record()
    for _ in range(steps):
        st.step_zorich()
        record()
    return out


# ---------------------------------------------------------------------------
# per-level table

LEVEL_COLUMNS = ("level", "mesh", "total_nonlinearity", "mean_nonlinearity",
                 "boundary_sup", "d_eta", "schwarzian_proxy")


def _level_row(orbit: Induction, budget: int) -> dict:
    from .renorm import (
        level_boundary,
        level_mean_nonlinearity,
        level_total_nonlinearity,
        renormalized_giet,
    )

    try:
        mesh = partition(orbit, budget, positions=False).mesh
    except FloorBudgetExceeded:
        mesh = float("nan")
    if isinstance(orbit, LengthOrbit):
        M = orbit.current_map()
        total, mean = M.total_nonlinearity(), M.mean_nonlinearity()
        bnd = M.boundary().values
        schw = distances(M).schwarzian_proxy
    else:
        total = level_total_nonlinearity(orbit)
        mean = level_mean_nonlinearity(orbit)
        bnd = level_boundary(orbit).values
        schw = 0.0 if orbit.base.is_affine else distances(renormalized_giet(orbit)[0]).schwarzian_proxy
    return {"level": orbit.zorich_count, "mesh": mesh, "total_nonlinearity": total,
            "mean_nonlinearity": mean, "boundary_sup": float(np.max(np.abs(bnd), initial=0.0)),
            "d_eta": total, "schwarzian_proxy": schw}


def level_table(orbit: Induction, steps: int, budget: int = FLOOR_BUDGET) -> list[dict]:
    """One row of :data:`LEVEL_COLUMNS` for level 0 and each of up to
    ``steps`` Zorich renormalizations, stopping when the partition would
    exceed ``budget`` floors."""
    rows = [_level_row(orbit, budget)]
    for _ in range(steps):
        try:
            orbit.step_zorich()
        except FloorBudgetExceeded:
            break
        rows.append(_level_row(orbit, budget))
    return rows
