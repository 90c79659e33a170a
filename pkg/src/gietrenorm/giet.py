"""Interval exchange maps in shape-profile coordinates.

A generalized interval exchange (GIET) is stored as an affine skeleton
(permutation pair, top lengths ``lam`` and log-slopes ``omega``) together
with one normalized profile diffeomorphism of [0, 1] per letter.  Letter
``j`` (1-based) sits at array index ``j - 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import diffeo, intmat
from .combinatorics import (
    PermutationPair,
    RotationPath,
    elementary_matrix,
    is_irreducible,
    singularity_data,
)
from .diffeo import BranchMap, Moebius, branch_from_dict
from .errors import ConeEmpty, ConfigError, NotPrimitive, SingularityHit

SINGULARITY_TOL = 1e-13
SCHEMA = "gietrenorm/map/1"


def _left_ends(order, lengths) -> np.ndarray:
    out = np.empty(len(lengths))
    acc = 0.0
    for letter in order:
        out[letter - 1] = acc
        acc += lengths[letter - 1]
    return out


@dataclass(frozen=True, eq=False)
class Giet:
    pi: PermutationPair
    lam: np.ndarray
    omega: np.ndarray
    profiles: tuple[BranchMap, ...]
    shift: float = 0.0  # t-shift recorded by the affine constructor
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        omega = np.asarray(self.omega, dtype=float)
        d = self.pi.d
        if lam.shape != (d,) or omega.shape != (d,) or len(self.profiles) != d:
            raise ConfigError("lengths, log-slopes and profiles need one entry per letter")
        if np.any(lam <= 0):
            raise ConfigError("lengths must be positive")
        if abs(lam.sum() - 1.0) > 1e-9:
            raise ConfigError(f"lengths must sum to 1, got {lam.sum()!r}")
        if abs(float(np.exp(omega) @ lam) - 1.0) > 1e-9:
            raise ConfigError("bottom lengths must sum to 1")
        if not is_irreducible(self.pi):
            raise ConfigError(f"{self.pi} is reducible")
        for p in self.profiles:
            if p.domain != (0.0, 1.0) and not np.allclose(p.domain, (0.0, 1.0), atol=1e-12):
                raise ConfigError("profiles must be diffeomorphisms of [0, 1]")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "profiles", tuple(self.profiles))
        rho = np.exp(omega)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "bottom_lam", rho * lam)
        object.__setattr__(self, "ut", _left_ends(self.pi.top, lam))
        object.__setattr__(self, "ub", _left_ends(self.pi.bottom, rho * lam))
        cuts = np.cumsum([lam[a - 1] for a in self.pi.top])
        object.__setattr__(self, "top_cuts", np.concatenate([[0.0], cuts]))
        us = [p.mean_nonlinearity_closed() if p.is_moebius else None for p in self.profiles]
        moeb = None if any(u is None for u in us) else np.array(us)
        object.__setattr__(self, "moebius_u", moeb)

    @property
    def d(self) -> int:
        return self.pi.d

    @property
    def kind(self) -> str:
        if self.is_affine:
            return "iet" if not np.any(self.omega) else "aiet"
        return "miet" if self.moebius_u is not None else "giet"

    @property
    def is_affine(self) -> bool:
        return self.moebius_u is not None and not np.any(self.moebius_u)

    # -- evaluation ---------------------------------------------------------
    def locate(self, x) -> np.ndarray:
        """Letters (1-based) of the top intervals containing ``x``."""
        x = np.asarray(x, dtype=float)
        pos = np.clip(np.searchsorted(self.top_cuts, x, side="right") - 1, 0, self.d - 1)
        top = np.asarray(self.pi.top)
        return top[pos]

    def check_singular(self, x, tol: float = SINGULARITY_TOL):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        inner = self.top_cuts[1:-1]
        dist = np.min(np.abs(x[:, None] - inner[None, :]), axis=1)
        if np.any(dist < tol):
            raise SingularityHit("point within tolerance of a discontinuity")

    def branch_jet(self, letter: int, x, order: int = 0) -> list[np.ndarray]:
        """Jet of the branch of ``letter`` at ``x`` (no interval check)."""
        i = letter - 1
        lt, lb = self.lam[i], self.bottom_lam[i]
        y = (np.asarray(x, dtype=float) - self.ut[i]) / lt
        prof = self.profiles[i]
        if self.moebius_u is not None:
            a = math.exp(-self.moebius_u[i] / 2.0)
            c = a - 1.0
            den = 1.0 + c * y
            j = [a * y / den, a / den**2, -2.0 * a * c / den**3, 6.0 * a * c * c / den**4]
        else:
            j = prof._jet(np.clip(y, 0.0, 1.0), order)
        out = [self.ub[i] + lb * j[0]]
        for k in range(1, order + 1):
            out.append(lb * j[k] / lt**k)
        return out

    def eval_array(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        letters = self.locate(x)
        out = np.empty_like(x)
        for a in np.unique(letters):
            sel = letters == a
            out[sel] = self.branch_jet(int(a), x[sel], 0)[0]
        return out, letters

    def eval(self, x: float, tol: float = SINGULARITY_TOL) -> tuple[float, int]:
        if not -tol <= x <= 1 + tol:
            raise ConfigError("x must lie in [0, 1]")
        self.check_singular(x, tol)
        y, letters = self.eval_array(np.array([x]))
        return float(y[0]), int(letters[0])

    def __call__(self, x):
        return self.eval_array(x)[0]

    def inverse_eval(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        cuts = np.concatenate([[0.0], np.cumsum([self.bottom_lam[a - 1] for a in self.pi.bottom])])
        pos = np.clip(np.searchsorted(cuts, y, side="right") - 1, 0, self.d - 1)
        letters = np.asarray(self.pi.bottom)[pos]
        out = np.empty_like(y)
        for a in np.unique(letters):
            i = a - 1
            sel = letters == a
            z = (y[sel] - self.ub[i]) / self.bottom_lam[i]
            out[sel] = self.ut[i] + self.lam[i] * self.profiles[i].inverse(np.clip(z, 0, 1))
        return out

    def log_derivative(self, x: float) -> float:
        self.check_singular(x)
        a = int(self.locate(np.array([x]))[0])
        return float(np.log(self.branch_jet(a, np.array([x]), 1)[1][0]))

    # -- invariants ---------------------------------------------------------
    def profile_log_slopes(self) -> tuple[np.ndarray, np.ndarray]:
        """``log D phi_j`` at 0 and at 1 for every letter, from closed-form jets."""
        at0 = np.empty(self.d)
        at1 = np.empty(self.d)
        for i, p in enumerate(self.profiles):
            if self.moebius_u is not None:
                at0[i], at1[i] = -self.moebius_u[i] / 2.0, self.moebius_u[i] / 2.0
            else:
                dv = p._jet(np.array([0.0, 1.0]), 1)[1]
                at0[i], at1[i] = math.log(dv[0]), math.log(dv[1])
        return at0, at1

    def mean_nonlinearity(self) -> float:
        at0, at1 = self.profile_log_slopes()
        return float(np.sum(at1 - at0))

    def total_nonlinearity(self) -> float:
        if self.moebius_u is not None:
            return float(np.sum(np.abs(self.moebius_u)))
        return float(sum(diffeo.nonlinearity_summary(p).total for p in self.profiles))

    def boundary(self) -> "BoundaryVector":
        at0, at1 = self.profile_log_slopes()
        return boundary_from_limits(self.pi, self.omega + at0, self.omega + at1)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": self.kind,
            "pi": self.pi.to_dict(),
            "lambda": self.lam.tolist(),
            "omega": self.omega.tolist(),
            "profiles": [p.to_dict() for p in self.profiles],
            "shift": self.shift,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def describe(self) -> str:
        sd = singularity_data(self.pi)
        b = self.boundary()
        fmt = lambda v: "[" + ", ".join(f"{x:.12g}" for x in v) + "]"
        lines = [
            f"kind      {self.kind}",
            f"pi        {self.pi.label()}",
            f"lambda    {fmt(self.lam)}",
            f"omega     {fmt(self.omega)}",
            f"kappa     {sd.kappa}",
            f"genus     {sd.genus}",
            f"boundary  {fmt(b.values)}",
        ]
        if self.moebius_u is not None and np.any(self.moebius_u):
            lines.append(f"moebius u {fmt(self.moebius_u)}")
        return "\n".join(lines)


class Aiet(Giet):
    def __init__(self, pi, lam, omega, shift: float = 0.0, meta=None):
        d = pi.d
        super().__init__(pi, lam, omega, tuple(diffeo.identity() for _ in range(d)),
                         shift, meta or {})


class Iet(Aiet):
    def __init__(self, pi, lam, meta=None):
        super().__init__(pi, lam, np.zeros(pi.d), 0.0, meta)


def giet_from_dict(data: dict) -> Giet:
    try:
        pi = PermutationPair.from_dict(data["pi"])
        lam = np.asarray(data["lambda"], dtype=float)
        omega = np.asarray(data.get("omega", np.zeros(pi.d)), dtype=float)
        kind = data.get("kind", "giet")
        shift = float(data.get("shift", 0.0))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad map description: {exc}") from exc
    if kind == "iet":
        return Iet(pi, lam)
    if kind == "aiet" or "profiles" not in data:
        return Aiet(pi, lam, omega, shift)
    profiles = tuple(branch_from_dict(p) for p in data["profiles"])
    return Giet(pi, lam, omega, profiles, shift)


def giet_from_json(text: str) -> Giet:
    return giet_from_dict(json.loads(text))


@dataclass(frozen=True)
class BoundaryVector:
    values: np.ndarray
    sum: float

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "sum": self.sum}


def boundary_from_limits(pi: PermutationPair, left_limits, right_limits) -> BoundaryVector:
    """Boundary of a piecewise continuous observable.

    ``left_limits[j]`` is the limit at the left end of the top interval of
    letter ``j + 1`` and ``right_limits[j]`` the limit at its right end.
    For discontinuity ``u_i`` the right limit comes from the letter at top
    slot ``i + 1`` and the left limit from the letter at slot ``i``, with
    zero conventions at ``u_0`` and ``u_d``.
    """
    sd = singularity_data(pi)
    d = pi.d
    vals = np.zeros(sd.kappa)
    for i in range(d + 1):
        fr = left_limits[pi.top[i] - 1] if i < d else 0.0
        fl = right_limits[pi.top[i - 1] - 1] if i > 0 else 0.0
        vals[sd.endpoint_singularity[i]] += fr - fl
    return BoundaryVector(vals, float(vals.sum()))


def boundary(T: Giet) -> BoundaryVector:
    return T.boundary()


# -- constructors -------------------------------------------------------------

def affine_from_slopes(pi: PermutationPair, lam, w) -> Aiet:
    """AIET with slopes ``exp(w + t)`` where ``t`` makes the bottom lengths
    sum to one; ``t`` is recorded as ``shift``."""
    lam = np.asarray(lam, dtype=float)
    w = np.asarray(w, dtype=float)
    s = float(np.exp(w) @ lam)
    if not (math.isfinite(s) and s > 0):
        raise ConeEmpty("no rescaling satisfies the bottom partition identity")
    t = -math.log(s)
    return Aiet(pi, lam, w + t, shift=t, meta={"w": w.tolist()})


def conjugate(T0: Giet, h: BranchMap) -> Giet:
    """The GIET ``h o T0 o h^{-1}``; profiles of Moebius-class ``h`` are
    returned in the one-parameter Moebius form."""
    if h.domain != (0.0, 1.0) or not np.allclose(h.codomain, (0.0, 1.0), atol=1e-12):
        raise ConfigError("h must be a diffeomorphism of [0, 1]")
    xs = np.linspace(0.0, 1.0, 1025)
    if np.any(h.derivative(xs) <= 0):
        from .errors import MonotonicityError

        raise MonotonicityError("h must be increasing")
    d = T0.d
    top_l = np.empty(d)
    bot_l = np.empty(d)
    profiles = []
    for i in range(d):
        s, e = T0.ut[i], T0.ut[i] + T0.lam[i]
        sb, eb = T0.ub[i], T0.ub[i] + T0.bottom_lam[i]
        hs, he, hsb, heb = (float(v) for v in h(np.array([s, e, sb, eb])))
        he = 1.0 if e >= 1.0 else he
        heb = 1.0 if eb >= 1.0 else heb
        top_l[i], bot_l[i] = he - hs, heb - hsb
        if T0.moebius_u is not None and not np.any(T0.moebius_u):
            branch = diffeo.Affine(T0.rho[i], sb - T0.rho[i] * s, (s, e))
        else:
            raise ConfigError("conjugate expects an affine base map")
        chain = diffeo.Composite(
            diffeo.Composite(
                diffeo.Composite(diffeo.affine_between((0.0, 1.0), (hs, he)),
                                 diffeo.Inverse(h)),
                diffeo.Composite(branch, h)),
            diffeo.affine_between((hsb, heb), (0.0, 1.0)),
        )
        if h.is_moebius:
            profiles.append(Moebius(chain.mean_nonlinearity_closed()))
        else:
            profiles.append(chain)
    lam = top_l / top_l.sum()
    omega = np.log(bot_l / top_l)
    return Giet(T0.pi, lam, omega, tuple(profiles), meta={"conjugacy": h.to_dict()})


def with_profiles(shape: Giet, profiles) -> Giet:
    return Giet(shape.pi, shape.lam, shape.omega, tuple(profiles), shape.shift)


def with_moebius(shape: Giet, u) -> Giet:
    return with_profiles(shape, [Moebius(float(v)) for v in u])


def path_matrix(path: RotationPath) -> intmat.Matrix:
    """Integer product ``Z_{p-1} ... Z_0`` of the elementary matrices."""
    return intmat.product([elementary_matrix(a) for a in path.arrows], path.start.d)


def is_primitive(a) -> bool:
    d = len(a)
    pos = [[x > 0 for x in row] for row in a]
    cur = pos
    for _ in range(d * d):
        if all(all(row) for row in cur):
            return True
        cur = [[any(cur[i][k] and pos[k][j] for k in range(d)) for j in range(d)]
               for i in range(d)]
    return False


def perron_vector(a, dps: int | None = None):
    """Normalized Perron eigenvector of ``a`` (sum one) and its eigenvalue.

    With ``dps`` the computation runs in mpmath at that many digits and
    returns mpf values.
    """
    if dps is None:
        m = np.array(a, dtype=float)
        vals, vecs = np.linalg.eig(m)
        k = int(np.argmax(vals.real))
        v = np.abs(vecs[:, k].real)
        v /= v.sum()
        for _ in range(3):  # polish by power iteration
            v = m @ v
            v /= v.sum()
        theta = float((m @ v).sum())
        return v, theta
    import mpmath

    with mpmath.workdps(dps + 10):
        m = mpmath.matrix([[mpmath.mpf(x) for x in row] for row in a])
        vals, vecs = mpmath.eig(m)
        k = max(range(len(vals)), key=lambda i: mpmath.re(vals[i]))
        v = [abs(mpmath.re(vecs[i, k])) for i in range(len(a))]
        s = sum(v)
        v = [x / s for x in v]
        theta = mpmath.re(vals[k])
    return v, theta


def periodic_type_iet(loop: RotationPath) -> Iet:
    """The IET whose induction follows ``loop`` forever."""
    if not loop.is_closed():
        raise ConfigError("loop must be closed")
    a = path_matrix(loop)
    if not is_primitive(a):
        raise NotPrimitive("no power up to d^2 of the period matrix is positive")
    at = [list(r) for r in zip(*a)]
    lam, theta = perron_vector(at)
    return Iet(loop.start, lam, meta={"theta": theta, "period": len(loop)})


def hyperbolic_periodic_aiet(loop: RotationPath, w) -> Aiet:
    """Lengths of the periodic IET of ``loop`` with log-slopes ``w``
    (orthogonal to the lengths) shifted so the bottom lengths sum to one."""
    T0 = periodic_type_iet(loop)
    w = np.asarray(w, dtype=float)
    if abs(float(w @ T0.lam)) > 1e-10 * max(1.0, np.abs(w).sum()):
        raise ConfigError("log-slopes must be orthogonal to the lengths")
    return affine_from_slopes(loop.start, T0.lam, w)
