"""Log-slope tracking along renormalization, the affine shadow and the
recurrent/divergent classification."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import intmat
from .cocycle import (
    SplittingEstimate,
    forward_splitting,
    oseledets_spaces,
    pull_back,
    unstable_transport,
)
from .combinatorics import singularity_data
from .errors import NoContraction, NumericError, WindowTooShort
from .giet import Giet
from .renorm import DEFAULT_DPS, Induction, accelerate_on_good_returns, orbit_for

SCHEMA = "gietrenorm/shadow/1"


def norm1(v) -> float:
    return float(np.abs(np.asarray(v, dtype=float)).sum())


@dataclass
class LogSlopeTrack:
    omegas: np.ndarray  # (N + 1, d)
    errors: np.ndarray  # (N, d): omega_{n+1} - Z_n omega_n
    K_T: float
    matrices: list
    bound_slack: float  # min over n of K_T ||Z_n|| - ||e_n||

    @property
    def steps(self) -> int:
        return len(self.matrices)

    def omega_norms(self) -> np.ndarray:
        return np.abs(self.omegas).sum(axis=1)

    def error_norms(self) -> np.ndarray:
        return np.abs(self.errors).sum(axis=1)


def track(base: Giet | Induction, steps: int, precision: str = "double",
          dps: int = DEFAULT_DPS, K_T: float | None = None) -> LogSlopeTrack:
    """Log-slope vectors of the first ``steps`` Zorich renormalizations."""
    orbit = base if isinstance(base, Induction) else orbit_for(base, precision, dps)
    T = orbit.base
    K = T.total_nonlinearity() if K_T is None else K_T
    om = [orbit.omega_n()]
    mats = []
    for _ in range(steps):
        mats.append(orbit.step_zorich())
        om.append(orbit.omega_n())
    om = np.array(om)
    errs = np.empty((steps, T.d))
    slack = math.inf
    for n, z in enumerate(mats):
        zf = intmat.to_float(z)
        pred = zf @ om[n]
        errs[n] = om[n + 1] - pred
        tol = 1e-9 * (1.0 + norm1(pred)) + 1e-12 * float(np.abs(zf).sum())
        gap = K * float(np.abs(zf).sum()) - norm1(errs[n])
        slack = min(slack, gap)
        if gap < -tol:
            raise NumericError(
                f"linear approximation bound fails at step {n}: "
                f"||e_n|| = {norm1(errs[n]):.3g} > K_T ||Z_n|| = {K * np.abs(zf).sum():.3g}")
    return LogSlopeTrack(om, errs, K, mats, slack)


@dataclass
class ShadowResult:
    v: np.ndarray
    unstable_part: np.ndarray  # projection of omega_0
    times: list[int]
    term_norms: list[float]
    ratio: float  # fitted geometric ratio of the nonzero terms
    tail_bound: float
    ambiguity: str = "central and stable components of the shadow are not determined"

    def to_dict(self) -> dict:
        return {"v": self.v.tolist(), "unstable_part": self.unstable_part.tolist(),
                "times": self.times, "term_norms": self.term_norms, "ratio": self.ratio,
                "tail_bound": self.tail_bound, "ambiguity": self.ambiguity}


def _unstable_coords(sp: SplittingEstimate, frame: np.ndarray, vec: np.ndarray) -> np.ndarray:
    basis = np.hstack([sp.gamma_s, sp.gamma_c, frame])
    coords = np.linalg.solve(basis, vec)
    return coords[-frame.shape[1]:]


def build_shadow(tr: LogSlopeTrack, splittings: dict[int, SplittingEstimate],
                 good_times) -> ShadowResult:
    """The affine shadow ``v`` of a log-slope track.

    ``splittings[0]`` supplies the unstable space at step 0; it is pushed
    along the orbit so that the unstable spaces at the good returns are
    exact images of it, which makes pulling them back a triangular solve.
    """
    if 0 not in splittings:
        raise NumericError("need a splitting estimate at step 0")
    times = sorted(t for t in set(good_times) if 0 < t <= tr.steps)
    sp0 = splittings[0]
    u0 = sp0.gamma_u
    frames = unstable_transport(tr.matrices, u0, [0] + times)
    frame0 = frames[0][0]
    x0 = _unstable_coords(sp0, frame0, tr.omegas[0])
    unstable_part = frame0 @ x0
    v = unstable_part.copy()
    d = tr.omegas.shape[1]
    norms = []
    prev = 0
    for n in times:
        if n not in splittings:
            continue
        q = intmat.to_float(intmat.product(tr.matrices[prev:n], d))
        e = tr.omegas[n] - q @ tr.omegas[prev]
        frame, factors = frames[n]
        xu = _unstable_coords(splittings[n], frame, e)
        vk = frame0 @ pull_back(xu, factors)
        v += vk
        norms.append(norm1(vk))
        prev = n
    nz = [x for x in norms if x > 1e-14]
    ratio = float("nan")
    tail = 0.0
    if len(nz) >= 3:
        slope = np.polyfit(np.arange(len(nz)), np.log(nz), 1)[0]
        ratio = float(math.exp(slope))
        if len(nz) >= 4 and ratio >= 1.0:
            raise NoContraction(f"shadow terms do not decay (fitted ratio {ratio:.3g})")
        tail = nz[-1] * ratio / (1 - ratio)
    return ShadowResult(v, unstable_part, times, norms, ratio, float(tail))


@dataclass
class ShadowThresholds:
    v_factor: float = 10.0
    escape: float = 50.0
    residual: float = 0.1
    min_growth: float = 1e3

    def V(self, omega0) -> float:
        return self.v_factor * max(1.0, norm1(omega0))


@dataclass
class ShadowVerdict:
    case: str  # "recurrent", "divergent" or "ambiguous"
    thresholds: ShadowThresholds
    V: float
    sup_return_norm: float
    v: list[float] | None
    residual: list[float]
    omega_norm: list[float]
    error_norm: list[float]
    growth: float
    last_quartile_trend: float
    residual_decreasing: bool
    reasons: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["thresholds"] = self.thresholds.__dict__
        out["schema"] = SCHEMA
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "omega_norm", "error_norm", "residual_ratio"])
        for n, on in enumerate(self.omega_norm):
            en = self.error_norm[n] if n < len(self.error_norm) else ""
            rr = self.residual[n] if n < len(self.residual) else ""
            w.writerow([n, repr(on), repr(en) if en != "" else "", repr(rr) if rr != "" else ""])
        return buf.getvalue()


def pushed_shadow(tr: LogSlopeTrack, v: np.ndarray) -> np.ndarray:
    """``Q(0, n) v`` for every logged ``n``."""
    out = [np.asarray(v, dtype=float)]
    for z in tr.matrices:
        out.append(intmat.to_float(z) @ out[-1])
    return np.array(out)


def residual_trace(tr: LogSlopeTrack, v: np.ndarray) -> np.ndarray:
    qv = pushed_shadow(tr, v)
    num = np.abs(tr.omegas - qv).sum(axis=1)
    den = np.abs(qv).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / den, np.inf)


def periodic_deviation(tr: LogSlopeTrack, v: np.ndarray, period: int, A) -> np.ndarray:
    """``||omega_{kp} - A^k v||`` at the period boundaries."""
    a = intmat.to_float(A)
    x = np.asarray(v, dtype=float)
    out = []
    for k in range(tr.steps // period + 1):
        out.append(norm1(tr.omegas[k * period] - x))
        x = a @ x
    return np.array(out)


@dataclass
class DeviationSummary:
    raw: list[float]
    floor: float
    range: float
    median: float
    bounded: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def deviation_summary(dev, floor: float) -> DeviationSummary:
    """Range-versus-median test on a deviation trace.

    Values under ``floor`` are indistinguishable from rounding and are
    raised to it before the test; the raw trace is kept alongside.
    """
    raw = np.asarray(dev, dtype=float)
    clipped = np.maximum(raw, floor)
    rng = float(clipped.max() - clipped.min())
    med = float(np.median(clipped))
    return DeviationSummary(raw.tolist(), float(floor), rng, med, bool(rng <= 2 * med))


def _trend(y: np.ndarray) -> float:
    if y.size < 2:
        return 0.0
    return float(np.polyfit(np.arange(y.size), y, 1)[0])


def classify(tr: LogSlopeTrack, shadow: ShadowResult | None, good_times=None,
             thresholds: ShadowThresholds | None = None) -> ShadowVerdict:
    """Finite-horizon verdict; ``ambiguous`` whenever neither case is clear."""
    th = thresholds or ShadowThresholds()
    d = tr.omegas.shape[1]
    norms = tr.omega_norms()
    growth = float(intmat.norm1(intmat.product(tr.matrices, d))) if tr.matrices else 1.0
    V = th.V(tr.omegas[0])
    times = sorted(set(good_times)) if good_times else list(range(tr.steps + 1))
    times = [t for t in times if t <= tr.steps] or [tr.steps]
    ret = norms[times]
    sup_ret = float(ret.max())
    tail = ret[len(ret) * 3 // 4:]
    trend = _trend(tail)
    reasons = []
    residual = residual_trace(tr, shadow.v) if shadow is not None else np.full(tr.steps + 1, np.nan)
    q4 = residual[len(residual) * 3 // 4:]
    finite = q4[np.isfinite(q4)]
    decreasing = bool(finite.size >= 2 and finite[-1] <= finite[0])
    if growth < th.min_growth:
        reasons.append(f"cocycle norm {growth:.3g} below {th.min_growth:.3g} at the horizon")
        case = "ambiguous"
    elif sup_ret <= V and trend <= 1e-9 * max(1.0, sup_ret):
        case = "recurrent"
    elif (norms.max() >= th.escape and shadow is not None
          and residual[-1] <= th.residual):
        case = "divergent"
    else:
        case = "ambiguous"
        if norms.max() < th.escape:
            reasons.append("log-slopes stayed below the escape threshold")
        if sup_ret > V:
            reasons.append("log-slopes at returns exceeded V")
        if shadow is None:
            reasons.append("no shadow available")
        elif residual[-1] > th.residual:
            reasons.append(f"residual ratio {residual[-1]:.3g} above {th.residual}")
    return ShadowVerdict(case, th, V, sup_ret,
                         shadow.v.tolist() if shadow is not None else None,
                         residual.tolist(), norms.tolist(), tr.error_norms().tolist(),
                         growth, trend, decreasing, reasons)


@dataclass
class ShadowRun:
    track: LogSlopeTrack
    good_times: list[int]
    splittings: dict
    shadow: ShadowResult | None
    verdict: ShadowVerdict
    continuation: int  # matrices appended after the horizon for the forward windows
    surrogate: int  # how many of those came from the supplied continuation

    def summary(self) -> dict:
        return {"case": self.verdict.case, "steps": self.track.steps,
                "v": None if self.shadow is None else self.shadow.v.tolist(),
                "final_residual": self.verdict.residual[-1],
                "final_omega_norm": self.verdict.omega_norm[-1],
                "good_times": self.good_times, "reasons": self.verdict.reasons,
                "surrogate_matrices": self.surrogate}


def run_shadow(base: Giet | Induction, steps: int, window: int = 120, past=None,
               continuation=None, spacing: int | None = None,
               thresholds: ShadowThresholds | None = None,
               precision: str = "double", dps: int = DEFAULT_DPS,
               extend: int | None = None, max_run: int = 10**4) -> ShadowRun:
    """Track, split, build the shadow and classify.

    Forward windows reach ``window`` Zorich steps past the horizon.  The
    orbit itself is continued first, for at most ``extend`` steps; when it stops (connection or
    precision loss) the remaining matrices are taken cyclically from
    ``continuation``.  ``past`` feeds the backward window at early steps;
    without it the step-0 unstable space is a complement of the forward
    slow space.  Good returns are multiples of ``spacing`` when given,
    otherwise the returns to a positive block found along the orbit.
    """
    orbit = base if isinstance(base, Induction) else orbit_for(base, precision, dps)
    tr = track(orbit, steps)
    mats = list(tr.matrices)
    genuine = 0
    orbit.max_run = min(orbit.max_run, max_run)
    for _ in range(window if extend is None else min(extend, window)):
        try:
            mats.append(orbit.step_zorich())
            genuine += 1
        except NumericError:
            break
    missing = window - genuine
    if missing and not continuation:
        raise WindowTooShort(f"orbit stopped {missing} steps short of the forward window")
    cont = list(continuation or [])
    mats += [cont[k % len(cont)] for k in range(missing)]
    sd = singularity_data(orbit.base.pi)
    g, kappa = sd.genus, sd.kappa
    if spacing:
        good = list(range(spacing, steps + 1, spacing))
    else:
        good = [t for t in accelerate_on_good_returns(mats).times if 0 < t <= steps]
    splits = {}
    try:
        splits[0] = oseledets_spaces(mats, 0, window, g, kappa, past=past)
    except WindowTooShort:
        if past:
            raise
        splits[0] = forward_splitting(mats, window, g, kappa)
    for n in good:
        try:
            splits[n] = oseledets_spaces(mats, n, window, g, kappa, past=past)
        except WindowTooShort:
            continue
    shadow = build_shadow(tr, splits, [t for t in good if t in splits])
    verdict = classify(tr, shadow, [0] + good, thresholds)
    return ShadowRun(tr, good, splits, shadow, verdict, window, missing)
