"""Rauzy-Veech and Zorich renormalization.

Two engines share the bookkeeping of :class:`Induction`:

* :class:`RenormState` induces an arbitrary GIET.  It keeps the absolute
  endpoints of every top and bottom interval of the induced map together
  with the word of base letters whose composition gives each induced
  branch.  Induced branches are only ever evaluated by composing base
  branches along these words.
* :class:`LengthOrbit` induces affine maps (standard or affine interval
  exchanges) from their lengths and log-slopes alone, which is what long
  cocycle orbits need.

Both run in binary64 by default; ``precision="extended"`` switches the
scalars to mpmath numbers with ``dps`` decimal digits.
"""
from __future__ import annotations

import copy
from functools import lru_cache
import csv
import io
import json
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from . import intmat, kernel
from .combinatorics import Move, PermutationPair, RauzyArrow, RotationPath, rauzy_move
from .diffeo import Moebius, SampledBranch, chebyshev_nodes
from .errors import (
    ConfigError,
    ConnectionDetected,
    FloorBudgetExceeded,
    NoPositiveWindow,
    RunawayStep,
    SingularityHit,
)
from .giet import Giet, boundary_from_limits
from .quadrature import ABS_TOL, integrate_abs

CONNECTION_TOL = 1e-13
MAX_RUN = 10**6
FLOOR_BUDGET = 10**7
DEFAULT_DPS = 40
SCHEMA = "gietrenorm/state/1"


def exact_parameters(T: Giet, dps: int):
    """Lengths and log-slopes of ``T`` as mpmath numbers.

    Uses high precision values stored in ``T.meta["exact"]`` when present;
    otherwise the binary64 values are taken as exact and the log-slopes
    are shifted so that the bottom lengths sum to one at ``dps`` digits.
    """
    with mpmath.workdps(dps):
        ex = T.meta.get("exact")
        if ex:
            lam = [mpmath.mpf(v) for v in ex["lambda"]]
            om = [mpmath.mpf(v) for v in ex.get("omega", ["0"] * T.d)]
        else:
            lam = [mpmath.mpf(float(v)) for v in T.lam]
            om = [mpmath.mpf(float(v)) for v in T.omega]
        s = sum(lam)
        lam = [v / s for v in lam]
        if any(om):
            t = -mpmath.log(sum(mpmath.exp(w) * v for w, v in zip(om, lam)))
            om = [w + t for w in om]
        return lam, om


@lru_cache(maxsize=1024)
def _elementary(d: int, loser: int, winner: int) -> intmat.Matrix:
    return tuple(tuple(int(i == j) + int(i == loser - 1 and j == winner - 1) for j in range(d))
                 for i in range(d))


class Induction:
    """Shared bookkeeping: permutation, heights, path and cocycle log."""

    max_run = MAX_RUN  # longest same-winner run accepted in one Zorich step

    def _init_log(self, pi: PermutationPair):
        self.pi = pi
        self.q = [1] * pi.d
        self.n = 0
        self.path = RotationPath()
        self.elementary: list[intmat.Matrix] = []
        self.zorich_matrices: list[intmat.Matrix] = []
        self.zorich_ends: list[int] = [0]  # Rauzy index after each Zorich step
        self.zorich_moves: list[Move] = []

    @property
    def d(self) -> int:
        return self.pi.d

    def copy(self):
        new = copy.copy(self)
        for name, value in vars(self).items():
            if isinstance(value, list):
                setattr(new, name, list(value))
        new.path = RotationPath(list(self.path.arrows))
        return new

    # subclasses implement _difference (positive means top wins) and _apply
    def _difference(self):
        raise NotImplementedError

    def connection_tol(self) -> float:
        if getattr(self, "precision", "double") == "extended":
            return 10.0 ** -(self.dps - 10)
        return CONNECTION_TOL

    def _apply(self, arrow: RauzyArrow):
        raise NotImplementedError

    def next_move(self) -> Move:
        diff = self._difference()
        if abs(diff) < self.connection_tol():
            raise ConnectionDetected(f"connection at Rauzy step {self.n}", step=self.n)
        return Move.TOP if diff > 0 else Move.BOTTOM

    def step_rauzy(self) -> RauzyArrow:
        arrow = rauzy_move(self.pi, self.next_move())
        self._apply(arrow)
        w, l = arrow.winner - 1, arrow.loser - 1
        self.q[l] += self.q[w]
        self.pi = arrow.target
        self.path.append(arrow)
        self.elementary.append(_elementary(self.d, arrow.loser, arrow.winner))
        self.n += 1
        return arrow

    def step_zorich(self) -> intmat.Matrix:
        first = self.next_move()
        start = self.n
        while True:
            self.step_rauzy()
            if self.n - start > self.max_run:
                raise RunawayStep(f"more than {self.max_run} {first.value} steps in a row")
            try:
                if self.next_move() is not first:
                    break
            except ConnectionDetected:
                break
        # one winner throughout a run, so the elementary matrices commute
        # and their product is I plus the loser counts in the winner column
        w = self.path.arrows[start].winner - 1
        z = [list(r) for r in intmat.identity(self.d)]
        for arrow in self.path.arrows[start:]:
            z[arrow.loser - 1][w] += 1
        z = tuple(map(tuple, z))
        self.zorich_matrices.append(z)
        self.zorich_ends.append(self.n)
        self.zorich_moves.append(first)
        return z

    def run(self, zorich_steps: int):
        for _ in range(zorich_steps):
            self.step_zorich()
        return self

    @property
    def zorich_count(self) -> int:
        return len(self.zorich_matrices)

    def rauzy_product(self, m: int, n: int) -> intmat.Matrix:
        """``Q(m, n)`` over elementary steps ``m <= k < n``."""
        return intmat.product(self.elementary[m:n], self.d)

    def cocycle(self, m: int, n: int) -> intmat.CocycleMatrix:
        """Zorich cocycle ``Q(m, n)`` between Zorich times ``m <= n``."""
        return intmat.CocycleMatrix(intmat.product(self.zorich_matrices[m:n], self.d), (m, n))

    def winners(self) -> list[int]:
        return self.path.winners


# ---------------------------------------------------------------------------
# word evaluation

class WordEvaluator:
    """Evaluate compositions of base branches along words."""

    def __init__(self, T: Giet, precision: str = "double", dps: int = DEFAULT_DPS):
        self.T = T
        self.precision = precision
        self.dps = dps
        self.params = kernel.params_of(T)
        if precision == "extended":
            if T.moebius_u is None:
                raise ConfigError("extended precision needs Moebius-class profiles")
            with mpmath.workdps(dps):
                lam, om = exact_parameters(T, dps)
                self.lt = lam
                self.lb = [mpmath.exp(w) * v for w, v in zip(om, lam)]
                self.ut = [mpmath.mpf(0)] * T.d
                self.ub = [mpmath.mpf(0)] * T.d
                acc = mpmath.mpf(0)
                for a in T.pi.top:
                    self.ut[a - 1] = acc
                    acc += self.lt[a - 1]
                acc = mpmath.mpf(0)
                for a in T.pi.bottom:
                    self.ub[a - 1] = acc
                    acc += self.lb[a - 1]
                self.a = [mpmath.exp(-mpmath.mpf(float(u)) / 2) for u in T.moebius_u]
        elif precision != "double":
            raise ConfigError("precision must be 'double' or 'extended'")

    def initial_endpoints(self):
        T = self.T
        if self.precision == "extended":
            L = list(self.ut)
            R = [u + l for u, l in zip(self.ut, self.lt)]
            BL = list(self.ub)
            BR = [u + l for u, l in zip(self.ub, self.lb)]
            one = mpmath.mpf(1)
        else:
            L = [float(v) for v in T.ut]
            R = [float(u + l) for u, l in zip(T.ut, T.lam)]
            BL = [float(v) for v in T.ub]
            BR = [float(u + l) for u, l in zip(T.ub, T.bottom_lam)]
            one = 1.0
        R[T.pi.top[-1] - 1] = one
        BR[T.pi.bottom[-1] - 1] = one
        return L, R, BL, BR

    def forward(self, word: np.ndarray, x):
        if self.precision == "extended":
            with mpmath.workdps(self.dps):
                for i in word:
                    y = (x - self.ut[i]) / self.lt[i]
                    x = self.ub[i] + self.lb[i] * (self.a[i] * y / (1 + (self.a[i] - 1) * y))
                return x
        if self.params is not None:
            return float(kernel.word_eval_trace(word, float(x), *self.params)[-1])
        return float(self.trace(word, x)[-1])

    def inverse(self, word: np.ndarray, y):
        if self.precision == "extended":
            with mpmath.workdps(self.dps):
                for i in word[::-1]:
                    z = (y - self.ub[i]) / self.lb[i]
                    t = z / (self.a[i] - (self.a[i] - 1) * z)
                    y = self.ut[i] + self.lt[i] * t
                return y
        if self.params is not None:
            return float(kernel.word_inverse(word, float(y), *self.params))
        T = self.T
        y = float(y)
        for i in word[::-1]:
            z = (y - T.ub[i]) / T.bottom_lam[i]
            y = float(T.ut[i] + T.lam[i] * T.profiles[i].inverse(np.clip(z, 0.0, 1.0)))
        return y

    def trace(self, word: np.ndarray, x0: float) -> np.ndarray:
        """Binary64 orbit of ``x0`` along ``word`` (length ``len(word) + 1``)."""
        if self.params is not None:
            return kernel.word_eval_trace(word, float(x0), *self.params)
        out = np.empty(len(word) + 1)
        out[0] = x = float(x0)
        for k, i in enumerate(word):
            x = float(self.T.branch_jet(int(i) + 1, np.array([x]), 0)[0][0])
            out[k + 1] = x
        return out

    def jets(self, word: np.ndarray, x: np.ndarray):
        """``(T^q x, log D, D2/D1, D3/D1)`` for arrays of binary64 points."""
        x = np.ascontiguousarray(x, dtype=float)
        if self.params is not None:
            return kernel.word_jet(word, x, *self.params)
        pos = x.copy()
        logd = np.zeros_like(x)
        eta = np.zeros_like(x)
        zeta = np.zeros_like(x)
        for i in word:
            g = self.T.branch_jet(int(i) + 1, pos, 3)
            d1 = np.exp(logd)
            r2, r3 = g[2] / g[1], g[3] / g[1]
            zeta = r3 * d1 * d1 + 3.0 * r2 * eta * d1 + zeta
            eta = r2 * d1 + eta
            logd = logd + np.log(g[1])
            pos = g[0]
        return pos, logd, eta, zeta


class WordStore:
    """Append-only DAG of word concatenations.

    Induction only links two existing nodes per Rauzy step; letter arrays
    are produced on demand and a few recent ones are cached.  Copies of an
    orbit may share one store since nodes never change.
    """

    def __init__(self, d: int):
        cap = max(64, 4 * d)
        self.left = np.full(cap, -1, dtype=np.int64)
        self.right = np.zeros(cap, dtype=np.int64)
        self.size = np.zeros(cap, dtype=np.int64)
        self.right[:d] = np.arange(d)
        self.size[:d] = 1
        self.count = d
        self._cache: dict[int, np.ndarray] = {}
        self._cached = 0

    def concat(self, a: int, b: int) -> int:
        if self.count == self.left.size:
            for name in ("left", "right", "size"):
                old = getattr(self, name)
                new = np.full(2 * old.size, -1 if name == "left" else 0, dtype=np.int64)
                new[: old.size] = old
                setattr(self, name, new)
        n = self.count
        self.left[n], self.right[n] = a, b
        self.size[n] = self.size[a] + self.size[b]
        self.count += 1
        return n

    def array(self, node: int) -> np.ndarray:
        hit = self._cache.get(node)
        if hit is not None:
            return hit
        size = int(self.size[node])
        if self.left[node] < 0:
            out = np.array([self.right[node]], dtype=np.int16)
        else:
            out = kernel.fill_word(self.left, self.right, node, size)
        if self._cached + size > 2**24:
            self._cache.clear()
            self._cached = 0
        self._cache[node] = out
        self._cached += size
        return out


class _WordMixin:
    """Word bookkeeping shared by both engines."""

    def _init_words(self, d: int):
        self.store = WordStore(d)
        self.word_nodes = list(range(d))

    def _link_words(self, arrow: RauzyArrow):
        w, l = arrow.winner - 1, arrow.loser - 1
        a, b = self.word_nodes[l], self.word_nodes[w]
        if arrow.move is Move.TOP:
            self.word_nodes[l] = self.store.concat(a, b)
        else:
            self.word_nodes[l] = self.store.concat(b, a)

    def word(self, j: int) -> np.ndarray:
        """Base letters (0-based) composing the induced branch of letter ``j + 1``."""
        return self.store.array(self.word_nodes[j])

    @property
    def words(self) -> list[np.ndarray] | None:
        if getattr(self, "store", None) is None:
            return None
        return [self.word(j) for j in range(self.d)]


# ---------------------------------------------------------------------------
# GIET engine

class RenormState(_WordMixin, Induction):
    """Induction state of a GIET at level ``n``.

    ``L, R`` are the absolute endpoints of the top intervals of the induced
    map on ``[0, a_n]`` and ``BL, BR`` those of its bottom intervals.
    """

    def __init__(self, base: Giet, precision: str = "double", dps: int = DEFAULT_DPS,
                 height_budget: int = FLOOR_BUDGET):
        self.base = base
        self.ev = WordEvaluator(base, precision, dps)
        self.L, self.R, self.BL, self.BR = self.ev.initial_endpoints()
        self._init_words(base.d)
        self.height_budget = height_budget
        self._init_log(base.pi)

    @property
    def precision(self) -> str:
        return self.ev.precision

    @property
    def a_n(self):
        return self.R[self.pi.top[-1] - 1]

    @property
    def log_a_n(self) -> float:
        return float(mpmath.log(self.a_n)) if self.precision == "extended" else math.log(self.a_n)

    def _difference(self):
        alpha, beta = self.pi.top[-1] - 1, self.pi.bottom[-1] - 1
        return float((self.BL[beta] - self.L[alpha]) / self.a_n)

    def _apply(self, arrow: RauzyArrow):
        w, l = arrow.winner - 1, arrow.loser - 1
        if max(self.q[w] + self.q[l], max(self.q)) > self.height_budget:
            raise FloorBudgetExceeded(f"height above {self.height_budget}")
        if arrow.move is Move.TOP:
            # winner w is the last top letter, loser l the last bottom letter
            cut = self.BL[l]
            y = self.ev.forward(self.word(w), cut)
            old_br = self.BR[w]
            self.R[w] = cut
            self.BR[w] = y
            self.BL[l] = y
            self.BR[l] = old_br
        else:
            # winner w is the last bottom letter, loser l the last top letter
            cut = self.L[l]
            x = self.ev.inverse(self.word(w), cut)
            old_r = self.R[w]
            self.BR[w] = cut
            self.R[w] = x
            self.L[l] = x
            self.R[l] = old_r
        self._link_words(arrow)

    # -- level data ---------------------------------------------------------
    def abs_lengths(self) -> np.ndarray:
        return np.array([float(r - l) for l, r in zip(self.L, self.R)])

    def abs_bottom_lengths(self) -> np.ndarray:
        return np.array([float(r - l) for l, r in zip(self.BL, self.BR)])

    @property
    def lambda_n(self) -> np.ndarray:
        a = self.a_n
        return np.array([float((r - l) / a) for l, r in zip(self.L, self.R)])

    def omega_n(self) -> np.ndarray:
        """Shape log-slopes ``log(|bottom_j| / |top_j|)`` of the induced map."""
        if self.precision == "extended":
            with mpmath.workdps(self.ev.dps):
                return np.array([float(mpmath.log((br - bl) / (r - l)))
                                 for l, r, bl, br in zip(self.L, self.R, self.BL, self.BR)])
        return np.log(self.abs_bottom_lengths() / self.abs_lengths())

    def float_endpoints(self):
        f = lambda v: np.array([float(x) for x in v])
        return f(self.L), f(self.R), f(self.BL), f(self.BR)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "base": self.base.to_dict(),
            "n": self.n,
            "zorich_steps": self.zorich_count,
            "pi": self.pi.to_dict(),
            "a_n": float(self.a_n),
            "log_a_n": self.log_a_n,
            "lambda": self.lambda_n.tolist(),
            "omega": self.omega_n().tolist(),
            "heights": list(self.q),
            "words": [run_length(w) for w in self.words],
            "moves": [m.value for m in self.path.moves],
            "precision": self.precision,
        }


def run_length(word: np.ndarray) -> list[list[int]]:
    """Run-length encoding ``[[letter, count], ...]`` with 1-based letters."""
    if len(word) == 0:
        return []
    w = np.asarray(word)
    cut = np.nonzero(np.diff(w))[0] + 1
    starts = np.concatenate([[0], cut])
    ends = np.concatenate([cut, [len(w)]])
    return [[int(w[s]) + 1, int(e - s)] for s, e in zip(starts, ends)]


def rauzy_step(state: RenormState) -> RenormState:
    new = state.copy()
    new.step_rauzy()
    return new


def zorich_step(state: RenormState) -> RenormState:
    new = state.copy()
    new.step_zorich()
    return new


def induced_jet(state: RenormState, j: int, x, order: int = 3, check: bool = True):
    """Jet of ``T^{q_j}`` at absolute points ``x`` of the top interval of ``j``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = float(state.L[j - 1]), float(state.R[j - 1])
    if check and (np.any(x < lo) or np.any(x > hi)):
        raise SingularityHit(f"point outside the induced interval of letter {j}")
    pos, logd, eta, zeta = state.ev.jets(state.word(j - 1), x)
    d1 = np.exp(logd)
    out = [pos, d1, eta * d1, zeta * d1]
    return out[: order + 1]


def induced_log_jet(state: RenormState, j: int, x):
    """``(T^q x, log D, eta, D3/D1)`` without exponentiating."""
    return state.ev.jets(state.word(j - 1), np.atleast_1d(np.asarray(x, dtype=float)))


def endpoint_log_derivatives(state: RenormState) -> tuple[np.ndarray, np.ndarray]:
    """``log D(T^{q_j})`` at the left and right end of each top interval."""
    L, R, _, _ = state.float_endpoints()
    left = np.empty(state.d)
    right = np.empty(state.d)
    for j in range(state.d):
        _, ld, _, _ = state.ev.jets(state.word(j), np.array([L[j], R[j]]))
        left[j], right[j] = ld
    return left, right


def level_mean_nonlinearity(state: RenormState) -> float:
    left, right = endpoint_log_derivatives(state)
    return float(np.sum(right - left))


def level_boundary(state: RenormState):
    left, right = endpoint_log_derivatives(state)
    return boundary_from_limits(state.pi, left, right)


def level_total_nonlinearity(state: RenormState, tol: float = ABS_TOL) -> float:
    """``|N|`` of the renormalized map: the integral of ``|eta|`` of the
    induced branches over their intervals."""
    if state.base.is_affine:
        return 0.0
    L, R, _, _ = state.float_endpoints()
    total = 0.0
    for j in range(state.d):
        word = state.words[j]
        f = lambda x, w=word: state.ev.jets(w, x)[2]
        total += integrate_abs(f, L[j], R[j], tol / state.d)[1]
    return total


def renormalized_giet(state: RenormState, nodes: int = 257) -> tuple[Giet, np.ndarray]:
    """The induced map rescaled to [0, 1] with grid-sampled profiles."""
    L, R, BL, BR = state.float_endpoints()
    omega = state.omega_n()
    lam = state.lambda_n
    y = chebyshev_nodes(nodes)
    profiles = []
    for j in range(state.d):
        w, h = R[j] - L[j], BR[j] - BL[j]
        pos, logd, eta, zeta = state.ev.jets(state.word(j), L[j] + w * y)
        d1 = np.exp(logd)
        jets = np.stack([(pos - BL[j]) / h, d1 * w / h, eta * d1 * w * w / h,
                         zeta * d1 * w**3 / h], axis=1)
        jets[0, 0], jets[-1, 0] = 0.0, 1.0
        profiles.append(SampledBranch(y, jets))
    lam = lam / lam.sum()
    om = omega - math.log(float(np.exp(omega) @ lam))
    return Giet(state.pi, lam, om, tuple(profiles)), omega


# ---------------------------------------------------------------------------
# length-only engine for affine and Moebius-profile maps

class LengthOrbit(_WordMixin, Induction):
    """Induction from shape-profile parameters alone.

    Works for maps whose profiles are all of the form ``m_u`` (affine maps
    being ``u = 0``).  That family is closed under restriction and
    composition, so each induced branch stays described by its top length,
    log-slope and a single profile parameter ``log a = -u/2``.  Lengths are
    rescaled to total one at every step.
    """

    def __init__(self, T: Giet, precision: str = "double", dps: int = DEFAULT_DPS,
                 track_words: bool = False, word_budget: int = FLOOR_BUDGET):
        if T.moebius_u is None:
            raise ConfigError("LengthOrbit needs affine or Moebius profiles")
        self.base = T
        self.precision = precision
        self.dps = dps
        self.moebius = bool(np.any(T.moebius_u))
        if precision == "extended":
            self.lam, self.om = exact_parameters(T, dps)
            with mpmath.workdps(dps):
                self.la = [mpmath.mpf(-float(u)) / 2 for u in T.moebius_u]
            self._m = mpmath
        elif precision == "double":
            self.lam = [float(v) for v in T.lam]
            self.om = [float(v) for v in T.omega]
            self.la = [-float(u) / 2.0 for u in T.moebius_u]
            self._m = math
        else:
            raise ConfigError("precision must be 'double' or 'extended'")
        self.log_a = 0.0
        self.track_words = track_words
        self.word_budget = word_budget
        self.store = None
        if track_words:
            self._init_words(T.d)
        self._init_log(T.pi)

    def _ctx(self):
        return mpmath.workdps(self.dps) if self.precision == "extended" else _Null()

    def _difference(self):
        alpha, beta = self.pi.top[-1] - 1, self.pi.bottom[-1] - 1
        with self._ctx():
            top = self.lam[alpha]
            bottom = self.lam[beta] * self._m.exp(self.om[beta])
            # lengths of a strongly distorted map span many orders of
            # magnitude, so ties are judged relative to the competitors
            return float((top - bottom) / max(top, bottom))

    def _apply(self, arrow: RauzyArrow):
        w, l = arrow.winner - 1, arrow.loser - 1
        if self.track_words and sum(self.q) + self.q[w] > self.word_budget:
            raise FloorBudgetExceeded(f"words exceed {self.word_budget} letters")
        m = self._m
        with self._ctx():
            lam, om, la = self.lam, self.om, self.la
            if arrow.move is Move.TOP:
                cut = lam[l] * m.exp(om[l])
                s = (lam[w] - cut) / lam[w]
                lam[w] = lam[w] - cut
            else:
                x = lam[l] * m.exp(-om[w])
                if self.moebius:
                    rest = x / lam[w]  # part of the bottom cut away
                    den = 1 + m.expm1(la[w]) * rest
                    s = (1 - rest) / den
                    lam[l] = m.exp(la[w]) * x / den
                else:
                    s = 1 - x / lam[w]
                    lam[l] = x
                lam[w] = lam[w] - lam[l]
            if self.moebius:
                log_d = m.log1p(m.expm1(la[w]) * s)
                om_w = om[w]
                om[w] = om_w + la[w] - log_d
                om[l] = om[l] + om_w - log_d
                la[l] = la[l] + la[w] - log_d
                la[w] = log_d
            else:
                om[l] = om[l] + om[w]
            total = sum(lam)
            self.lam = [v / total for v in lam]
            self.log_a += float(m.log(total))
        if self.track_words:
            self._link_words(arrow)

    @property
    def lambda_n(self) -> np.ndarray:
        return np.array([float(v) for v in self.lam])

    def omega_n(self) -> np.ndarray:
        return np.array([float(v) for v in self.om])

    def moebius_n(self) -> np.ndarray:
        """Profile parameters ``u`` of the current induced map."""
        return np.array([-2.0 * float(v) for v in self.la])

    def total_nonlinearity(self) -> float:
        return float(np.abs(self.moebius_n()).sum())

    def mean_nonlinearity(self) -> float:
        return float(self.moebius_n().sum())

    def current_map(self) -> Giet:
        """The renormalized map at the current level."""
        lam = self.lambda_n
        om = self.omega_n()
        om = om - math.log(float(np.exp(om) @ lam))
        return Giet(self.pi, lam, om, tuple(Moebius(float(u)) for u in self.moebius_n()))

    @property
    def a_n(self) -> float:
        return math.exp(self.log_a)

    @property
    def log_a_n(self) -> float:
        return self.log_a

    def to_dict(self) -> dict:
        out = {
            "schema": SCHEMA,
            "base": self.base.to_dict(),
            "n": self.n,
            "zorich_steps": self.zorich_count,
            "pi": self.pi.to_dict(),
            "a_n": self.a_n,
            "log_a_n": self.log_a,
            "lambda": self.lambda_n.tolist(),
            "omega": self.omega_n().tolist(),
            "moebius_u": self.moebius_n().tolist(),
            "heights": list(self.q),
            "moves": [m.value for m in self.path.moves],
            "precision": self.precision,
        }
        if self.track_words:
            out["words"] = [run_length(w) for w in self.words]
        return out


class _Null:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def orbit_for(T: Giet, precision: str = "double", dps: int = DEFAULT_DPS, **kw) -> Induction:
    """The cheapest engine able to induce ``T``."""
    if T.moebius_u is not None:
        return LengthOrbit(T, precision, dps, **kw)
    return RenormState(T, precision, dps)


# ---------------------------------------------------------------------------
# dynamical partitions

@dataclass
class DynamicalPartition:
    level: int
    letters: np.ndarray  # letter (1-based) of each floor
    index: np.ndarray  # floor index k inside its tower
    lengths: np.ndarray
    left: np.ndarray | None = None  # absolute floor positions when available

    @property
    def mesh(self) -> float:
        return float(self.lengths.max())

    def tower_measures(self) -> np.ndarray:
        d = int(self.letters.max())
        return np.array([self.lengths[self.letters == j].sum() for j in range(1, d + 1)])

    def tower(self, j: int) -> np.ndarray:
        sel = self.letters == j
        order = np.argsort(self.index[sel])
        return self.lengths[sel][order]

    def max_overlap(self) -> float:
        if self.left is None:
            raise ConfigError("floor positions unavailable")
        order = np.argsort(self.left)
        lo = self.left[order]
        hi = lo + self.lengths[order]
        return float(max(0.0, np.max(hi[:-1] - lo[1:]))) if lo.size > 1 else 0.0


def partition(state: Induction, budget: int = FLOOR_BUDGET, positions: bool = True) -> DynamicalPartition:
    """Floors ``T^k(I_j)`` for ``0 <= k < q_j``.

    For affine bases floor lengths come from the slopes along the words,
    which keeps tiny floors accurate; otherwise both ends of every base
    interval are pushed along its word.
    """
    if sum(state.q) > budget:
        raise FloorBudgetExceeded(f"{sum(state.q)} floors exceed the budget {budget}")
    base = state.base
    words = getattr(state, "words", None)
    if words is None:
        raise ConfigError("partition needs an orbit that tracks words")
    letters, index, lengths, lefts = [], [], [], []
    by_slopes = isinstance(state, LengthOrbit) and not state.moebius
    if isinstance(state, LengthOrbit):
        scale = state.log_a
        lam = state.lambda_n
        ev = WordEvaluator(base)
        starts = _length_orbit_starts(state)
        L = np.array(starts)
        R = L + state.a_n * lam
    else:
        L, R, _, _ = state.float_endpoints()
        ev = state.ev
    for j in range(state.d):
        word = words[j]
        q = len(word)
        if by_slopes:
            logs = np.concatenate([[0.0], np.cumsum(base.omega[word[:-1]])])
            lengths.append(np.exp(scale + math.log(lam[j]) + logs))
            if positions:
                lefts.append(ev.trace(word[:-1], starts[j]))
        else:
            tl = ev.trace(word[:-1], L[j])
            tr = ev.trace(word[:-1], R[j])
            lengths.append(tr - tl)
            lefts.append(tl)
        letters.append(np.full(q, j + 1))
        index.append(np.arange(q))
    left = np.concatenate(lefts) if lefts else None
    return DynamicalPartition(state.n, np.concatenate(letters), np.concatenate(index),
                              np.concatenate(lengths), left)


def _length_orbit_starts(state: LengthOrbit) -> list[float]:
    a = state.a_n
    lam = state.lambda_n
    out = [0.0] * state.d
    acc = 0.0
    for letter in state.pi.top:
        out[letter - 1] = acc * a
        acc += lam[letter - 1]
    return out


# ---------------------------------------------------------------------------
# good returns

@dataclass
class GoodReturns:
    times: list[int]  # Zorich times n_k with Q(n_k, n_k + 2p) = A A
    weak_times: list[int]  # times where both p-windows are positive (flagged variant)
    window: int
    A: intmat.Matrix
    start: int


def accelerate_on_good_returns(zorich_matrices, A=None, p: int | None = None,
                               p_max: int = 12) -> GoodReturns:
    """Zorich times ``n`` where the next ``2p`` Zorich matrices multiply to ``A A``.

    With ``A`` omitted the first positive window of length ``p <= p_max``
    along the orbit is used.  Emitted times are spaced by at least ``2p``.
    """
    mats = list(zorich_matrices)
    if not mats:
        raise NoPositiveWindow("empty orbit")
    d = len(mats[0])
    start = 0
    if A is None:
        found = None
        for n0 in range(len(mats)):
            for plen in range(1, p_max + 1):
                if n0 + plen > len(mats):
                    break
                prod = intmat.product(mats[n0 : n0 + plen], d)
                if intmat.is_positive(prod):
                    found = (n0, plen, prod)
                    break
            if found:
                break
        if not found:
            raise NoPositiveWindow(f"no positive window of length <= {p_max}")
        start, p, A = found
    else:
        A = tuple(tuple(int(x) for x in r) for r in A)
        if not intmat.is_positive(A):
            raise NoPositiveWindow("the given block is not positive")
        if p is None:
            raise ConfigError("window length p is required with an explicit block")
    times, weak = [], []
    last = last_w = -10**18
    for n in range(0, len(mats) - 2 * p + 1):
        first = intmat.product(mats[n : n + p], d)
        if not intmat.is_positive(first):
            continue
        second = intmat.product(mats[n + p : n + 2 * p], d)
        if first == A and second == A and n - last >= 2 * p:
            times.append(n)
            last = n
        if intmat.is_positive(second) and n - last_w >= 2 * p:
            weak.append(n)
            last_w = n
    return GoodReturns(times, weak, p, A, start)


# ---------------------------------------------------------------------------
# orbit log

def orbit_rows(orbit: Induction, steps: int, mesh: bool = False):
    """Run ``steps`` Zorich steps and yield one record per step."""
    for _ in range(steps):
        z = orbit.step_zorich()
        row = {
            "n": orbit.zorich_count,
            "move": orbit.zorich_moves[-1].value,
            "winner": orbit.path.arrows[-1].winner,
            "run": orbit.zorich_ends[-1] - orbit.zorich_ends[-2],
            "norm_Z": intmat.norm1(z),
            "lambda": orbit.lambda_n.tolist(),
            "omega": orbit.omega_n().tolist(),
            "a_n": orbit.a_n if isinstance(orbit, LengthOrbit) else float(orbit.a_n),
            "log_a_n": orbit.log_a_n,
        }
        if mesh:
            row["mesh"] = partition(orbit, positions=False).mesh
        yield row


def orbit_csv(rows, d: int, header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(header)
    cols = (["n", "move", "winner", "run", "norm_Z"] + [f"lambda_{j}" for j in range(1, d + 1)]
            + [f"omega_{j}" for j in range(1, d + 1)] + ["mesh", "a_n", "log_a_n"])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([r["n"], r["move"], r["winner"], r["run"], r["norm_Z"]]
                   + [repr(float(v)) for v in r["lambda"]] + [repr(float(v)) for v in r["omega"]]
                   + [repr(r["mesh"]) if "mesh" in r else "", repr(float(r["a_n"])),
                      repr(float(r["log_a_n"]))])
    return buf.getvalue()


def state_json(orbit: Induction) -> str:
    return json.dumps(orbit.to_dict(), indent=1)


def brute_force_first_return(T: Giet, bound: float, x, max_steps: int = 10**8):
    """First return of points ``x`` to ``[0, bound)`` by iterating ``T``."""
    x = np.ascontiguousarray(np.atleast_1d(x), dtype=float)
    params = kernel.params_of(T)
    if params is not None:
        top = np.asarray(T.pi.top, dtype=np.int64) - 1
        return kernel.first_return(x, float(bound), *params, T.top_cuts, top, max_steps)
    out = x.copy()
    times = np.zeros(x.shape, dtype=np.int64)
    active = np.ones(x.shape, dtype=bool)
    steps = 0
    while active.any() and steps < max_steps:
        out[active] = T(out[active])
        times[active] += 1
        active &= ~(out < bound)
        steps += 1
    return out, times


def induced_map_error(state: RenormState, points: int = 100, rng=None) -> float:
    """Largest difference, in rescaled coordinates, between the word-based
    induced map and brute-force first return to ``[0, a_n)`` at random
    points of the base intervals."""
    rng = np.random.default_rng(0) if rng is None else rng
    L, R, _, _ = state.float_endpoints()
    bound = float(state.a_n)
    per = max(1, points // state.d)
    worst = 0.0
    for j in range(state.d):
        xs = L[j] + (R[j] - L[j]) * rng.uniform(1e-6, 1 - 1e-6, per)
        induced = state.ev.jets(state.word(j), xs)[0]
        brute, times = brute_force_first_return(state.base, bound, xs)
        if np.any(times != state.q[j]):
            return math.inf
        worst = max(worst, float(np.max(np.abs(induced - brute))) / bound)
    return worst
