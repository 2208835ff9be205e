"""Log-domain arithmetic."""

import math

import numpy as np

from ._validation import ContractViolation

NEG_INF = -np.inf


def log_sum_exp(values):
    """Stable ``log(sum(exp(values)))``.

    Returns ``-inf`` iff every input is ``-inf``; otherwise finite for any
    finite input.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ContractViolation("log_sum_exp of an empty sequence")
    m = v.max()
    if m == NEG_INF:
        return NEG_INF
    if m == np.inf:
        return np.inf
    return float(m + np.log(np.sum(np.exp(v - m))))


def log_softmax(logits, axis=-1):
    """Normalize ``logits`` into log-probabilities along ``axis``."""
    x = np.asarray(logits, dtype=np.float64)
    if x.size == 0:
        raise ContractViolation("log_softmax of an empty vector")
    if np.isnan(x).any():
        raise ContractViolation("log_softmax input contains NaN")
    if not np.all(np.isfinite(x)):
        raise ContractViolation("log_softmax input must be finite")
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def softmax(logits, axis=-1):
    return np.exp(log_softmax(logits, axis=axis))


def log_add(a, b):
    """Two-argument log-sum-exp for Python floats."""
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))
