"""Compiled orbit composition for maps whose profiles are Moebius maps.

A branch of such a map is ``x -> ub + lb * m_a((x - ut) / lt)`` with
``m_a(y) = a y / (1 + (a - 1) y)``; identity profiles have ``a = 1``.
The same arithmetic is used by :meth:`Giet.branch_jet`, so compiled and
interpreted evaluations agree to the last bit.
"""
from __future__ import annotations

import math

import numba
import numpy as np


@numba.njit(cache=True)
def word_eval(word, x, ut, lt, ub, lb, a):
    """Apply the branches listed in ``word`` (0-based letters) to each ``x``."""
    out = x.copy()
    for k in range(word.shape[0]):
        i = word[k]
        c = a[i] - 1.0
        for p in range(out.shape[0]):
            y = (out[p] - ut[i]) / lt[i]
            out[p] = ub[i] + lb[i] * (a[i] * y / (1.0 + c * y))
    return out


@numba.njit(cache=True)
def word_eval_trace(word, x0, ut, lt, ub, lb, a):
    """Orbit of the single point ``x0`` along ``word``: entry k is the
    image after k branches."""
    out = np.empty(word.shape[0] + 1)
    out[0] = x0
    x = x0
    for k in range(word.shape[0]):
        i = word[k]
        y = (x - ut[i]) / lt[i]
        x = ub[i] + lb[i] * (a[i] * y / (1.0 + (a[i] - 1.0) * y))
        out[k + 1] = x
    return out


@numba.njit(cache=True)
def word_inverse(word, y0, ut, lt, ub, lb, a):
    """Preimage of ``y0`` under the composition described by ``word``."""
    y = y0
    for k in range(word.shape[0] - 1, -1, -1):
        i = word[k]
        z = (y - ub[i]) / lb[i]
        t = z / (a[i] - (a[i] - 1.0) * z)
        y = ut[i] + lt[i] * t
    return y


@numba.njit(cache=True)
def word_jet(word, x, ut, lt, ub, lb, a):
    """Value, log-derivative, ``D2/D1`` and ``D3/D1`` of the composition.

    Returns four arrays.  Ratios are accumulated instead of raw derivatives
    so that long words neither overflow nor underflow.
    """
    n = x.shape[0]
    pos = x.copy()
    logd = np.zeros(n)
    eta = np.zeros(n)
    zeta = np.zeros(n)
    for k in range(word.shape[0]):
        i = word[k]
        ai = a[i]
        c = ai - 1.0
        s1 = lb[i] / lt[i]
        for p in range(n):
            y = (pos[p] - ut[i]) / lt[i]
            den = 1.0 + c * y
            g1 = s1 * ai / (den * den)
            r2 = -2.0 * c / (den * lt[i])  # g2 / g1
            r3 = 6.0 * c * c / (den * den * lt[i] * lt[i])  # g3 / g1
            d1 = math.exp(logd[p])
            zeta[p] = r3 * d1 * d1 + 3.0 * r2 * eta[p] * d1 + zeta[p]
            eta[p] = r2 * d1 + eta[p]
            logd[p] += math.log(g1)
            pos[p] = ub[i] + lb[i] * (ai * y / den)
    return pos, logd, eta, zeta


@numba.njit(cache=True)
def first_return(x, bound, ut, lt, ub, lb, a, cuts, top, max_steps):
    """Brute force first return to ``[0, bound)`` by plain iteration.

    ``cuts`` are the top discontinuities (length d + 1) and ``top`` the
    0-based top row.  Returns images and return times (-1 if not returned).
    """
    n = x.shape[0]
    out = np.empty(n)
    times = np.full(n, -1, dtype=np.int64)
    d = top.shape[0]
    for p in range(n):
        xp = x[p]
        for s in range(1, max_steps + 1):
            slot = np.searchsorted(cuts, xp, side="right") - 1
            if slot < 0:
                slot = 0
            if slot > d - 1:
                slot = d - 1
            i = top[slot]
            y = (xp - ut[i]) / lt[i]
            xp = ub[i] + lb[i] * (a[i] * y / (1.0 + (a[i] - 1.0) * y))
            if xp < bound:
                out[p] = xp
                times[p] = s
                break
        else:
            out[p] = np.nan
    return out, times


@numba.njit(cache=True)
def backward_entry(y, bound, ut, lt, ub, lb, a, bcuts, bottom, max_steps):
    """Iterate the inverse map from each ``y`` until the orbit enters
    ``[0, bound)``.

    ``bcuts`` are the bottom discontinuities (length d + 1) and ``bottom``
    the 0-based bottom row.  Returns the entry points, the number of
    inverse steps (-1 if the budget ran out) and ``log D(T^-k)(y)``.
    """
    n = y.shape[0]
    out = np.empty(n)
    steps = np.full(n, -1, dtype=np.int64)
    logs = np.zeros(n)
    d = bottom.shape[0]
    for p in range(n):
        yp = y[p]
        acc = 0.0
        if yp < bound:
            out[p] = yp
            steps[p] = 0
            continue
        for s in range(1, max_steps + 1):
            slot = np.searchsorted(bcuts, yp, side="right") - 1
            if slot < 0:
                slot = 0
            if slot > d - 1:
                slot = d - 1
            i = bottom[slot]
            ai = a[i]
            z = (yp - ub[i]) / lb[i]
            t = z / (ai - (ai - 1.0) * z)
            den = 1.0 + (ai - 1.0) * t
            # derivative of the forward branch at the preimage
            acc -= math.log(lb[i] / lt[i] * ai / (den * den))
            yp = ut[i] + lt[i] * t
            if yp < bound:
                out[p] = yp
                steps[p] = s
                logs[p] = acc
                break
        else:
            out[p] = np.nan
            logs[p] = np.nan
    return out, steps, logs


def params_of(T):
    """Parameter arrays of a Moebius-profile map, or ``None``."""
    if T.moebius_u is None:
        return None
    a = np.exp(-np.asarray(T.moebius_u) / 2.0)
    return (np.ascontiguousarray(T.ut), np.ascontiguousarray(T.lam),
            np.ascontiguousarray(T.ub), np.ascontiguousarray(T.bottom_lam), a)


@numba.njit(cache=True)
def fill_word(left, right, root, size):
    """Letters of node ``root`` of a concatenation DAG: leaves have
    ``left < 0`` and store their letter in ``right``."""
    out = np.empty(size, dtype=np.int16)
    stack = np.empty(size + 1, dtype=np.int64)
    top = 0
    stack[0] = root
    pos = 0
    while top >= 0:
        n = stack[top]
        top -= 1
        if left[n] < 0:
            out[pos] = right[n]
            pos += 1
        else:
            top += 1
            stack[top] = right[n]
            top += 1
            stack[top] = left[n]
    return out
