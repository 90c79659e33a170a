"""Batched adaptive Simpson quadrature.

The integrand is called on whole arrays of nodes at once, which keeps
expensive integrands (orbit compositions) at one call per refinement
sweep.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import QuadratureNotConverged

ABS_TOL = 1e-10
MAX_PANELS = 2**16


def adaptive_simpson(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = ABS_TOL,
    max_panels: int = MAX_PANELS,
    initial: int = 8,
) -> float:
    """Integrate a vectorized ``f`` over ``[a, b]`` to absolute tolerance ``tol``."""
    if b <= a:
        return 0.0
    edges = np.linspace(a, b, initial + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    vals = f(np.concatenate([edges, mid]))
    flo, fhi, fmid = vals[:initial], vals[1 : initial + 1], vals[initial + 1 :]
    whole = (hi - lo) / 6.0 * (flo + 4 * fmid + fhi)
    total = 0.0
    n_panels = initial
    width = b - a
    while lo.size:
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        v = f(np.concatenate([lm, rm]))
        flm, frm = v[: lo.size], v[lo.size :]
        h = hi - lo
        left = h / 12.0 * (flo + 4 * flm + fmid)
        right = h / 12.0 * (fmid + 4 * frm + fhi)
        err = left + right - whole
        ok = np.abs(err) <= 15.0 * tol * h / width
        total += float(np.sum((left + right + err / 15.0)[ok]))
        bad = ~ok
        if not bad.any():
            break
        n_panels += int(bad.sum())
        if n_panels > max_panels:
            raise QuadratureNotConverged(
                f"adaptive Simpson exceeded {max_panels} panels on [{a}, {b}]"
            )
        lo_b, mid_b, hi_b = lo[bad], mid[bad], hi[bad]
        lo = np.concatenate([lo_b, mid_b])
        hi = np.concatenate([mid_b, hi_b])
        mid = np.concatenate([lm[bad], rm[bad]])
        flo_n = np.concatenate([flo[bad], fmid[bad]])
        fhi_n = np.concatenate([fmid[bad], fhi[bad]])
        fmid = np.concatenate([flm[bad], frm[bad]])
        whole = np.concatenate([left[bad], right[bad]])
        flo, fhi = flo_n, fhi_n
    return total


def sign_change_roots(
    f: Callable[[np.ndarray], np.ndarray], a: float, b: float, samples: int = 257
) -> list[float]:
    """Locate the sign changes of a vectorized ``f`` on a sample grid and
    refine each by bisection to machine precision."""
    x = np.linspace(a, b, samples)
    y = f(x)
    s = np.sign(y)
    # roots sitting exactly on an interior sample
    roots = [float(v) for v in x[1:-1][s[1:-1] == 0]]
    for k in np.nonzero(s[:-1] * s[1:] < 0)[0]:
        lo, hi = x[k], x[k + 1]
        flo = y[k]
        for _ in range(200):
            m = 0.5 * (lo + hi)
            if m <= lo or m >= hi:
                break
            fm = f(np.array([m]))[0]
            if fm == 0:
                lo = hi = m
                break
            if np.sign(fm) == np.sign(flo):
                lo, flo = m, fm
            else:
                hi = m
        roots.append(0.5 * (lo + hi))
    return sorted(roots)


def integrate_abs(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = ABS_TOL,
    max_panels: int = MAX_PANELS,
) -> tuple[float, float]:
    """Return ``(int f, int |f|)`` splitting the domain at sign changes."""
    cuts = [a] + sign_change_roots(f, a, b) + [b]
    signed = 0.0
    absolute = 0.0
    share = tol / max(1, len(cuts) - 1)
    for lo, hi in zip(cuts, cuts[1:]):
        piece = adaptive_simpson(f, lo, hi, share, max_panels)
        signed += piece
        absolute += abs(piece)
    return signed, absolute
