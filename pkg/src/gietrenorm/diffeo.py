"""Orientation preserving interval diffeomorphisms with derivatives up to
order three, their non-linearity and Schwarzian derivative.

All maps are vectorized: ``jet`` accepts scalars or arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import BPoly

from .errors import ConfigError, DomainError, MonotonicityError
from .quadrature import ABS_TOL, integrate_abs

DOMAIN_TOL = 1e-12


def _arr(x):
    return np.asarray(x, dtype=float)


class BranchMap:
    """Base class.  Subclasses implement ``_jet`` (no domain check)."""

    kind = "abstract"
    domain: tuple[float, float]
    codomain: tuple[float, float]

    def _jet(self, x: np.ndarray, order: int) -> list[np.ndarray]:
        raise NotImplementedError

    def jet(self, x, order: int = 3) -> list[np.ndarray]:
        x = _arr(x)
        x0, x1 = self.domain
        tol = DOMAIN_TOL * max(1.0, abs(x1 - x0))
        if np.any(x < x0 - tol) or np.any(x > x1 + tol):
            raise DomainError(f"{self.kind}: point outside domain {self.domain}")
        return self._jet(x, order)

    def __call__(self, x):
        return self.jet(x, 0)[0]

    def derivative(self, x):
        return self.jet(x, 1)[1]

    def inverse(self, y):
        """Inverse by safeguarded Newton iteration on the codomain."""
        y = _arr(y)
        x0, x1 = self.domain
        y0, y1 = self.codomain
        lo = np.full(y.shape, x0)
        hi = np.full(y.shape, x1)
        x = x0 + (x1 - x0) * (y - y0) / (y1 - y0)
        for _ in range(100):
            x = np.clip(x, lo, hi)
            f, df = self._jet(x, 1)
            r = f - y
            lo = np.where(r < 0, x, lo)
            hi = np.where(r > 0, x, hi)
            step = r / df
            xn = x - step
            outside = (xn <= lo) | (xn >= hi)
            xn = np.where(outside, 0.5 * (lo + hi), xn)
            if np.all(np.abs(xn - x) <= 1e-17 + 4e-16 * np.abs(x)):
                x = xn
                break
            x = xn
        return x

    # Moebius detection: a Moebius-class branch normalizes to m_u.
    is_moebius = False

    def mean_nonlinearity_closed(self) -> float:
        """``log Df(x1) - log Df(x0)``, the exact integral of eta."""
        x0, x1 = self.domain
        d = self._jet(np.array([x0, x1]), 1)[1]
        return float(math.log(d[1]) - math.log(d[0]))

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


@dataclass(frozen=True, repr=False)
class Affine(BranchMap):
    slope: float
    offset: float = 0.0
    domain: tuple[float, float] = (0.0, 1.0)

    kind = "affine"
    is_moebius = True

    def __post_init__(self):
        if not self.slope > 0:
            raise MonotonicityError("affine slope must be positive")
        object.__setattr__(self, "domain", tuple(map(float, self.domain)))

    @property
    def codomain(self):
        x0, x1 = self.domain
        return (self.slope * x0 + self.offset, self.slope * x1 + self.offset)

    def _jet(self, x, order):
        out = [self.slope * x + self.offset, np.full(x.shape, self.slope)]
        out += [np.zeros(x.shape)] * 2
        return out[: order + 1]

    def inverse(self, y):
        return (_arr(y) - self.offset) / self.slope

    def to_dict(self):
        return {"kind": self.kind, "slope": self.slope, "offset": self.offset,
                "domain": list(self.domain)}


def affine_between(domain, codomain) -> Affine:
    (x0, x1), (y0, y1) = domain, codomain
    s = (y1 - y0) / (x1 - x0)
    return Affine(s, y0 - s * x0, (x0, x1))


def identity(domain=(0.0, 1.0)) -> Affine:
    return Affine(1.0, 0.0, domain)


def _moebius_unit_jet(a: float, y: np.ndarray, order: int):
    # m(y) = a y / (1 + (a-1) y), a = exp(-u/2)
    c = a - 1.0
    den = 1.0 + c * y
    out = [a * y / den, a / den**2]
    if order >= 2:
        out.append(-2.0 * a * c / den**3)
    if order >= 3:
        out.append(6.0 * a * c * c / den**4)
    return out[: order + 1]


@dataclass(frozen=True, repr=False)
class Moebius(BranchMap):
    """The Moebius map with mean non-linearity ``u`` sending ``domain`` onto
    ``codomain`` (both default to [0, 1])."""

    u: float
    domain: tuple[float, float] = (0.0, 1.0)
    codomain: tuple[float, float] = None  # type: ignore[assignment]

    kind = "moebius"
    is_moebius = True

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(map(float, self.domain)))
        cod = self.domain if self.codomain is None else self.codomain
        object.__setattr__(self, "codomain", tuple(map(float, cod)))
        if not math.isfinite(self.u):
            raise ConfigError("Moebius parameter must be finite")

    @property
    def a(self) -> float:
        return math.exp(-self.u / 2.0)

    def _jet(self, x, order):
        (x0, x1), (y0, y1) = self.domain, self.codomain
        w, h = x1 - x0, y1 - y0
        m = _moebius_unit_jet(self.a, (x - x0) / w, order)
        out = [y0 + h * m[0]]
        for k in range(1, order + 1):
            out.append(h * m[k] / w**k)
        return out

    def inverse(self, y):
        (x0, x1), (y0, y1) = self.domain, self.codomain
        z = (_arr(y) - y0) / (y1 - y0)
        a = self.a
        # z = a t / (1 + (a-1) t)  =>  t = z / (a - (a-1) z)
        t = z / (a - (a - 1.0) * z)
        return x0 + (x1 - x0) * t

    def mean_nonlinearity_closed(self):
        return float(self.u)

    def to_dict(self):
        d = {"kind": self.kind, "u": self.u, "domain": list(self.domain)}
        if self.codomain != self.domain:
            d["codomain"] = list(self.codomain)
        return d


def moebius_from_mean(u: float) -> Moebius:
    """The Moebius map of [0, 1] fixing both ends with mean non-linearity ``u``."""
    return Moebius(float(u))


@dataclass(frozen=True, repr=False)
class MoebiusGeneral(BranchMap):
    """``x -> (a x + b) / (c x + d)`` restricted to ``domain``."""

    a: float
    b: float
    c: float
    d: float
    domain: tuple[float, float] = (0.0, 1.0)

    kind = "moebius_general"
    is_moebius = True

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(map(float, self.domain)))
        if not self.a * self.d - self.b * self.c > 0:
            raise MonotonicityError("need ad - bc > 0")
        x0, x1 = self.domain
        if (self.c * x0 + self.d) * (self.c * x1 + self.d) <= 0:
            raise DomainError("pole inside the domain")

    @property
    def codomain(self):
        f = self._jet(np.array(self.domain), 0)[0]
        return (float(f[0]), float(f[1]))

    def _jet(self, x, order):
        det = self.a * self.d - self.b * self.c
        den = self.c * x + self.d
        out = [(self.a * x + self.b) / den, det / den**2,
               -2.0 * self.c * det / den**3, 6.0 * self.c**2 * det / den**4]
        return out[: order + 1]

    def inverse(self, y):
        y = _arr(y)
        return (self.d * y - self.b) / (self.a - self.c * y)

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b, "c": self.c,
                "d": self.d, "domain": list(self.domain)}


@dataclass(frozen=True, repr=False)
class PolyPerturb(BranchMap):
    """``x -> x + eps * p(x)`` on [0, 1] with ``p(0) = p(1) = 0``.

    ``coeffs`` are in ascending order of degree.
    """

    eps: float
    coeffs: tuple[float, ...]

    kind = "poly"
    domain = (0.0, 1.0)
    codomain = (0.0, 1.0)

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        object.__setattr__(self, "coeffs", c)
        if abs(P.polyval(0.0, c)) > 1e-14 or abs(P.polyval(1.0, c)) > 1e-12:
            raise ConfigError("perturbation must vanish at 0 and 1")
        grid = np.linspace(0.0, 1.0, 1024)
        crit = P.polyroots(P.polyder(c, 2)) if len(c) > 2 else np.array([])
        crit = np.real(crit[np.abs(np.imag(crit)) < 1e-12]) if crit.size else crit
        pts = np.concatenate([grid, crit[(crit >= 0) & (crit <= 1)]])
        if np.min(1.0 + self.eps * P.polyval(pts, P.polyder(c))) <= 1e-8:
            raise MonotonicityError("perturbed map is not increasing")

    def _jet(self, x, order):
        c = np.array(self.coeffs)
        out = [x + self.eps * P.polyval(x, c)]
        for k in range(1, order + 1):
            dk = P.polyval(x, P.polyder(c, k)) if len(c) > k else np.zeros(x.shape)
            out.append((1.0 if k == 1 else 0.0) + self.eps * dk)
        return out

    def to_dict(self):
        return {"kind": self.kind, "eps": self.eps, "coeffs": list(self.coeffs)}


@dataclass(frozen=True, repr=False)
class AffineConjugate(BranchMap):
    """``outer o core o inner`` with affine ``inner`` and ``outer``."""

    inner: Affine
    core: BranchMap
    outer: Affine

    kind = "affine_conjugate"

    @property
    def is_moebius(self):  # type: ignore[override]
        return self.core.is_moebius

    @property
    def domain(self):  # type: ignore[override]
        y0, y1 = self.core.domain
        return tuple(float(v) for v in self.inner.inverse(np.array([y0, y1])))

    @property
    def codomain(self):  # type: ignore[override]
        y = self.outer(np.array(self.core.codomain))
        return (float(y[0]), float(y[1]))

    def _jet(self, x, order):
        s, t = self.inner.slope, self.outer.slope
        y = np.clip(self.inner.slope * x + self.inner.offset, *self.core.domain)
        cj = self.core._jet(y, order)
        out = [t * cj[0] + self.outer.offset]
        for k in range(1, order + 1):
            out.append(t * cj[k] * s**k)
        return out

    def inverse(self, y):
        return self.inner.inverse(self.core.inverse(self.outer.inverse(y)))

    def to_dict(self):
        return {"kind": self.kind, "inner": self.inner.to_dict(),
                "core": self.core.to_dict(), "outer": self.outer.to_dict()}


def compose_jets(g_jet, f_jet, order: int):
    """Jet of ``g o f`` from the jet of ``f`` at x and of ``g`` at f(x)."""
    out = [g_jet[0]]
    if order >= 1:
        out.append(g_jet[1] * f_jet[1])
    if order >= 2:
        out.append(g_jet[2] * f_jet[1] ** 2 + g_jet[1] * f_jet[2])
    if order >= 3:
        out.append(g_jet[3] * f_jet[1] ** 3 + 3 * g_jet[2] * f_jet[1] * f_jet[2]
                   + g_jet[1] * f_jet[3])
    return out


@dataclass(frozen=True, repr=False)
class Composite(BranchMap):
    """``second o first``."""

    first: BranchMap
    second: BranchMap

    kind = "composite"

    @property
    def is_moebius(self):  # type: ignore[override]
        return self.first.is_moebius and self.second.is_moebius

    @property
    def domain(self):  # type: ignore[override]
        return self.first.domain

    @property
    def codomain(self):  # type: ignore[override]
        return self.second.codomain

    def _jet(self, x, order):
        fj = self.first._jet(x, order)
        y = np.clip(fj[0], *self.second.domain)
        return compose_jets(self.second._jet(y, order), fj, order)

    def inverse(self, y):
        return self.first.inverse(self.second.inverse(y))

    def to_dict(self):
        return {"kind": self.kind, "first": self.first.to_dict(),
                "second": self.second.to_dict()}


@dataclass(frozen=True, repr=False)
class Inverse(BranchMap):
    base: BranchMap

    kind = "inverse"

    @property
    def is_moebius(self):  # type: ignore[override]
        return self.base.is_moebius

    @property
    def domain(self):  # type: ignore[override]
        return self.base.codomain

    @property
    def codomain(self):  # type: ignore[override]
        return self.base.domain

    def _jet(self, y, order):
        x = self.base.inverse(y)
        j = self.base._jet(x, order)
        out = [x]
        if order >= 1:
            out.append(1.0 / j[1])
        if order >= 2:
            out.append(-j[2] / j[1] ** 3)
        if order >= 3:
            out.append((3 * j[2] ** 2 - j[1] * j[3]) / j[1] ** 5)
        return out

    def inverse(self, x):
        return self.base(x)

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict()}


class SampledBranch(BranchMap):
    """Piecewise Hermite interpolant through jets given at nodes."""

    kind = "sampled"

    def __init__(self, nodes, jets):
        nodes = np.asarray(nodes, dtype=float)
        jets = np.asarray(jets, dtype=float)  # shape (n_nodes, order+1)
        if np.any(jets[:, 1] <= 0):
            raise MonotonicityError("sampled branch must have positive derivative")
        self.nodes = nodes
        self.jets = jets
        self._poly = BPoly.from_derivatives(nodes, jets)
        self._der = [self._poly] + [self._poly.derivative(k) for k in (1, 2, 3)]
        self.domain = (float(nodes[0]), float(nodes[-1]))
        self.codomain = (float(jets[0, 0]), float(jets[-1, 0]))

    def _jet(self, x, order):
        x = np.clip(x, *self.domain)
        return [self._der[k](x) for k in range(order + 1)]

    def mean_nonlinearity_closed(self):
        return float(math.log(self.jets[-1, 1]) - math.log(self.jets[0, 1]))

    def to_dict(self):
        return {"kind": self.kind, "nodes": self.nodes.tolist(),
                "jets": self.jets.tolist()}


def chebyshev_nodes(n: int = 257, a: float = 0.0, b: float = 1.0) -> np.ndarray:
    """Chebyshev-Lobatto points on [a, b], endpoints included, increasing."""
    k = np.arange(n)
    t = 0.5 * (1.0 - np.cos(np.pi * k / (n - 1)))
    t[0], t[-1] = 0.0, 1.0
    return a + (b - a) * t


def branch_from_dict(data: dict) -> BranchMap:
    kind = data.get("kind")
    try:
        if kind == "affine":
            return Affine(data["slope"], data.get("offset", 0.0),
                          tuple(data.get("domain", (0.0, 1.0))))
        if kind == "moebius":
            cod = data.get("codomain")
            return Moebius(data["u"], tuple(data.get("domain", (0.0, 1.0))),
                           tuple(cod) if cod is not None else None)
        if kind == "moebius_general":
            return MoebiusGeneral(data["a"], data["b"], data["c"], data["d"],
                                  tuple(data.get("domain", (0.0, 1.0))))
        if kind == "poly":
            return PolyPerturb(data["eps"], tuple(data["coeffs"]))
        if kind == "affine_conjugate":
            return AffineConjugate(branch_from_dict(data["inner"]),
                                   branch_from_dict(data["core"]),
                                   branch_from_dict(data["outer"]))
        if kind == "composite":
            return Composite(branch_from_dict(data["first"]),
                             branch_from_dict(data["second"]))
        if kind == "inverse":
            return Inverse(branch_from_dict(data["base"]))
        if kind == "sampled":
            return SampledBranch(data["nodes"], data["jets"])
    except KeyError as exc:
        raise ConfigError(f"missing field {exc} for branch kind {kind!r}") from exc
    raise ConfigError(f"unknown branch kind {kind!r}")


# -- operations ---------------------------------------------------------------

def eval_jet(f: BranchMap, x, order: int = 3):
    if not 0 <= order <= 3:
        raise ConfigError("order must be in 0..3")
    out = f.jet(x, order)
    if np.ndim(x) == 0:
        return tuple(float(v) for v in out)
    return tuple(out)


def eta(f: BranchMap, x):
    """Non-linearity ``D^2 f / D f``."""
    j = f.jet(x, 2)
    r = j[2] / j[1]
    return float(r) if np.ndim(x) == 0 else r


def schwarzian(f: BranchMap, x):
    j = f.jet(x, 3)
    r = j[3] / j[1] - 1.5 * (j[2] / j[1]) ** 2
    return float(r) if np.ndim(x) == 0 else r


@dataclass(frozen=True)
class NonlinearitySummary:
    mean: float
    total: float
    sup_eta: float


def nonlinearity_summary(f: BranchMap, quad_points: int = 64,
                         tol: float = ABS_TOL) -> NonlinearitySummary:
    """Mean and total non-linearity by adaptive quadrature of eta and |eta|."""
    if quad_points < 8:
        raise ConfigError("quad_points must be at least 8")
    x0, x1 = f.domain

    def fn(x):
        j = f._jet(x, 2)
        return j[2] / j[1]

    mean, total = integrate_abs(fn, x0, x1, tol)
    sup = float(np.max(np.abs(fn(np.linspace(x0, x1, max(quad_points, 1025))))))
    return NonlinearitySummary(mean, total, sup)


def normalize(f: BranchMap) -> BranchMap:
    """``b o f o a`` with affine ``a``, ``b`` so the result maps [0,1] onto [0,1]."""
    inner = affine_between((0.0, 1.0), f.domain)
    outer = affine_between(f.codomain, (0.0, 1.0))
    return AffineConjugate(inner, f, outer)


def reconstruct_from_eta(eta_fn, n: int = 4097) -> SampledBranch:
    """The diffeo of [0,1] whose non-linearity is ``eta_fn``:
    ``phi(x) = int_0^x exp(E) / int_0^1 exp(E)`` with ``E' = eta``."""
    from scipy.integrate import cumulative_simpson

    x = np.linspace(0.0, 1.0, n)
    e = np.asarray(eta_fn(x), dtype=float)
    big_e = cumulative_simpson(e, x=x, initial=0.0)
    w = np.exp(big_e)
    prim = cumulative_simpson(w, x=x, initial=0.0)
    z = prim[-1]
    de = np.gradient(e, x, edge_order=2)
    d1 = w / z
    jets = np.stack([prim / z, d1, d1 * e, d1 * (de + e * e)], axis=1)
    return SampledBranch(x, jets)
