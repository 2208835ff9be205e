"""Transducer lattice: forward/backward variables, vanilla loss, gate posteriors.

Node ``(t, u)`` has consumed frames ``0..t`` partially and emitted ``u``
labels. A blank moves ``(t, u) -> (t+1, u)``, a label moves
``(t, u) -> (t, u+1)``, and every path terminates with a blank out of
``(T-1, U)``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from ._validation import BLANK, ContractViolation, check_lattice


@dataclass(frozen=True)
class FBTables:
    alpha: Optional[np.ndarray]
    beta: Optional[np.ndarray]
    total: float


def arc_scores(z, labels):
    """Split a lattice into blank scores ``(T, U+1)`` and label scores ``(T, U)``."""
    blank = np.ascontiguousarray(z[:, :, BLANK])
    U = len(labels)
    emit = np.ascontiguousarray(z[:, np.arange(U), labels]) if U else np.zeros((z.shape[0], 0))
    return blank, emit


def _entry(T):
    entry = np.full(T, -np.inf)
    entry[0] = 0.0
    return entry


def _exit(blank):
    exit_ = np.full(blank.shape[0], -np.inf)
    exit_[-1] = blank[-1, -1]
    return exit_


def forward(z, labels):
    """Forward variables ``alpha[t, u]``; ``total`` is ``log P(l|x)``."""
    z, labels = check_lattice(z, labels)
    blank, emit = arc_scores(z, labels)
    alpha = _kernels.forward_rows(blank, emit, _entry(z.shape[0]))
    return FBTables(alpha=alpha, beta=None, total=float(alpha[-1, -1] + blank[-1, -1]))


def backward(z, labels):
    """Backward variables ``beta[t, u]``, including the transition leaving ``(t, u)``."""
    z, labels = check_lattice(z, labels)
    blank, emit = arc_scores(z, labels)
    beta = _kernels.backward_rows(blank, emit, _exit(blank))
    return FBTables(alpha=None, beta=beta, total=float(beta[0, 0]))


def forward_backward(z, labels):
    z, labels = check_lattice(z, labels)
    blank, emit = arc_scores(z, labels)
    alpha = _kernels.forward_rows(blank, emit, _entry(z.shape[0]))
    beta = _kernels.backward_rows(blank, emit, _exit(blank))
    return FBTables(alpha=alpha, beta=beta, total=float(alpha[-1, -1] + blank[-1, -1]))


def vanilla_loss(z, labels):
    """Negative log-likelihood ``-log P(l|x)`` summed over all alignments."""
    return -forward(z, labels).total


def anti_diagonal_totals(fb):
    """``log sum_{t+u=n} alpha*beta`` for every ``n`` in ``[0, T-1+U]``.

    Each entry equals ``fb.total`` when the tables are consistent.
    """
    T, U1 = fb.alpha.shape
    ab = fb.alpha + fb.beta
    out = np.empty(T + U1 - 1)
    for n in range(T + U1 - 1):
        t = np.arange(max(0, n - U1 + 1), min(T - 1, n) + 1)
        vals = ab[t, n - t]
        m = vals.max()
        out[n] = m if m == -np.inf else m + np.log(np.exp(vals - m).sum())
    return out


def gate_posteriors(z, labels, fb=None):
    """Log gate posteriors ``g[t, u-1]``: paths emitting ``l_u`` at frame ``t``.

    Returns a ``(T, U)`` array; every column log-sums to ``log P(l|x)``.
    """
    z, labels = check_lattice(z, labels)
    if len(labels) == 0:
        raise ContractViolation("gate posteriors need at least one label")
    if fb is None:
        fb = forward_backward(z, labels)
    _, emit = arc_scores(z, labels)
    return fb.alpha[:, :-1] + emit + fb.beta[:, 1:]
