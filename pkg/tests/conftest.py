import numpy as np
import pytest

from brt.numerics import log_softmax


def random_lattice(rng, T, U, V, scale=1.5):
    """Normalized log lattice with labels drawn from 1..V."""
    labels = rng.integers(1, V + 1, size=U)
    return log_softmax(rng.normal(scale=scale, size=(T, U + 1, V + 1))), labels


def planted_lattice(T, labels, frames, V, eps=0.0):
    """Lattice putting all mass on one path; ``frames`` are 1-based emission frames."""
    U = len(labels)
    p = np.full((T, U + 1, V + 1), eps)
    for t in range(T):
        for u in range(U + 1):
            if u < U and frames[u] == t + 1:
                p[t, u, labels[u]] = 1.0
            else:
                p[t, u, 0] = 1.0
    p /= p.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore"):
        return np.log(p)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
