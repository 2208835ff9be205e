"""Compiled inner loops for the lattice recursions.

All kernels work on two arc-score tables taken from a lattice ``z``:
``blank[t, r] = z[t, r, 0]`` and ``emit[t, r] = z[t, r, l_{r+1}]``.
"""

import math

import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True)
def _lse2(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@njit(cache=True)
def forward_rows(blank, emit, entry):
    """Forward recursion over a band of rows.

    ``entry[t]`` is the log weight flowing into row 0 at frame ``t`` from
    outside the band. The full lattice uses ``entry = [0, -inf, ...]``.
    """
    T, R = blank.shape
    alpha = np.full((T, R), NEG_INF)
    for t in range(T):
        for r in range(R):
            if r == 0:
                a = entry[t]
            else:
                a = alpha[t, r - 1] + emit[t, r - 1]
            if t > 0:
                a = _lse2(a, alpha[t - 1, r] + blank[t - 1, r])
            alpha[t, r] = a
    return alpha


@njit(cache=True)
def backward_rows(blank, emit, exit_):
    """Backward recursion over a band of rows.

    The top row ``R-1`` leaves the band at frame ``t`` with log weight
    ``exit_[t]``. A blank from the last frame leads nowhere.
    """
    T, R = blank.shape
    beta = np.full((T, R), NEG_INF)
    for t in range(T - 1, -1, -1):
        for r in range(R - 1, -1, -1):
            if r == R - 1:
                b = exit_[t]
            else:
                b = emit[t, r] + beta[t, r + 1]
            if t < T - 1:
                b = _lse2(b, blank[t, r] + beta[t + 1, r])
            beta[t, r] = b
    return beta


@njit(cache=True)
def viterbi_suffix(blank, emit):
    """Best log score of any path suffix from each node (max-plus backward)."""
    T, R = blank.shape
    best = np.full((T, R), NEG_INF)
    for t in range(T - 1, -1, -1):
        for r in range(R - 1, -1, -1):
            if t == T - 1 and r == R - 1:
                best[t, r] = blank[t, r]
                continue
            b = NEG_INF
            if r < R - 1:
                b = emit[t, r] + best[t, r + 1]
            if t < T - 1:
                b = max(b, blank[t, r] + best[t + 1, r])
            best[t, r] = b
    return best
