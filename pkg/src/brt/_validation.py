"""Input validation helpers shared across the package."""

import numpy as np

BLANK = 0


class ContractViolation(ValueError):
    """Raised when an input breaks a documented precondition."""


def check_labels(labels, vocab_size=None):
    """Return ``labels`` as a 1-D int64 array, rejecting blanks and out-of-range ids."""
    arr = np.asarray(labels, dtype=np.int64).reshape(-1)
    if arr.size and arr.min() < 1:
        raise ContractViolation("label ids must be >= 1 (0 is reserved for blank)")
    if vocab_size is not None and arr.size and arr.max() > vocab_size:
        raise ContractViolation(
            f"label id {int(arr.max())} outside vocabulary [1, {vocab_size}]")
    return arr


def check_lattice(z, labels, normalized=True, atol=1e-10):
    """Validate a lattice tensor of shape ``(T, U+1, V+1)`` against its labels.

    Returns the lattice as a float64 array and the labels as int64.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 3:
        raise ContractViolation(f"lattice must be 3-D (T, U+1, V+1), got shape {z.shape}")
    T, U1, V1 = z.shape
    if T < 1 or V1 < 2:
        raise ContractViolation(f"need T >= 1 and V >= 1, got shape {z.shape}")
    labels = check_labels(labels, V1 - 1)
    if labels.size != U1 - 1:
        raise ContractViolation(
            f"lattice has U={U1 - 1} label positions but {labels.size} labels given")
    if np.isnan(z).any():
        raise ContractViolation("lattice contains NaN")
    if normalized:
        m = z.max(axis=-1, keepdims=True)
        totals = (m + np.log(np.exp(z - m).sum(axis=-1, keepdims=True)))[..., 0]
        if not np.all(np.abs(totals) <= atol):
            worst = float(np.max(np.abs(totals)))
            raise ContractViolation(f"lattice slices are not normalized (max |lse| = {worst:.3g})")
    return z, labels


def check_raw_logits(logits, labels):
    """Validate unnormalized joint logits; every entry must be finite."""
    logits = np.asarray(logits, dtype=np.float64)
    z, labels = check_lattice(logits, labels, normalized=False)
    if not np.all(np.isfinite(z)):
        raise ContractViolation("raw logits must be finite")
    return z, labels


def check_sequences(X, y=None):
    """Validate a corpus of feature matrices and (optional) label sequences.

    Returns lists of float64 2-D arrays and int64 label arrays.
    """
    if len(X) == 0:
        raise ContractViolation("empty corpus")
    feats = []
    d = None
    for x in X:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ContractViolation(f"features must be a (T, d) matrix with T >= 1, got {x.shape}")
        if d is None:
            d = x.shape[1]
        elif x.shape[1] != d:
            raise ContractViolation("feature dimension differs across utterances")
        if not np.all(np.isfinite(x)):
            raise ContractViolation("features must be finite")
        feats.append(x)
    if y is None:
        return feats, None
    if len(y) != len(feats):
        raise ContractViolation(f"{len(feats)} feature matrices but {len(y)} label sequences")
    return feats, [check_labels(l) for l in y]
