"""Brute-force path enumeration: exact reference values on tiny lattices.

Nothing here shares code with the dynamic programs it checks.
"""

import math
from dataclasses import dataclass

from ._validation import BLANK, ContractViolation, check_lattice, check_labels
from .risk import RiskSpec, Variant, risk_offline, risk_streaming

MAX_PATHS = 10**6


@dataclass(frozen=True)
class Path:
    symbols: tuple
    log_prob: float = float("nan")

    def emission_frames(self):
        """1-based emission frame of every label, in order."""
        frames, frame = [], 1
        for s in self.symbols[:-1]:
            if s == BLANK:
                frame += 1
            else:
                frames.append(frame)
        return frames

    def emission_frame(self, u):
        return self.emission_frames()[u - 1]

    @property
    def last_emission_frame(self):
        frames = self.emission_frames()
        return frames[-1] if frames else None


def enumerate_paths(T, labels):
    """All blank-augmented paths over ``T`` frames that collapse to ``labels``."""
    labels = [int(v) for v in check_labels(labels)]
    U = len(labels)
    if T < 1:
        raise ContractViolation("T must be >= 1")
    if math.comb(T - 1 + U, U) > MAX_PATHS:
        raise ContractViolation(f"refusing to enumerate more than {MAX_PATHS} paths")
    out = []

    def walk(t, u, prefix):
        if t == T - 1 and u == U:
            out.append(Path(tuple(prefix) + (BLANK,)))
            return
        if u < U:
            walk(t, u + 1, prefix + [labels[u]])
        if t < T - 1:
            walk(t + 1, u, prefix + [BLANK])

    walk(0, 0, [])
    return out


def path_log_prob(z, labels, path):
    """Sum of per-step token log-posteriors along ``path``."""
    t = u = 0
    total = 0.0
    for s in path.symbols:
        total += float(z[t, u, s])
        if s == BLANK:
            t += 1
        else:
            if s != labels[u]:
                raise ContractViolation("path does not spell the label sequence")
            u += 1
    return total


def scored_paths(z, labels):
    z, labels = check_lattice(z, labels)
    labels = [int(v) for v in labels]
    return [Path(p.symbols, path_log_prob(z, labels, p)) for p in enumerate_paths(z.shape[0], labels)]


def _neg_log(terms):
    m = max(terms)
    if m == -math.inf:
        return math.inf
    return -(m + math.log(sum(math.exp(x - m) for x in terms)))


def oracle_gates(z, labels):
    """Gate table rebuilt by grouping enumerated paths on each label's emission frame.

    Returned as nested lists ``gates[t][u-1]`` of log values.
    """
    paths = scored_paths(z, labels)
    T, U = z.shape[0], len(labels)
    sums = [[0.0] * U for _ in range(T)]
    for p in paths:
        for u, frame in enumerate(p.emission_frames()):
            sums[frame - 1][u] += math.exp(p.log_prob)
    return [[math.log(v) if v > 0 else -math.inf for v in row] for row in sums]


def oracle_token_losses(z, labels, spec):
    """Per-token expected-risk losses ``J_u`` for the streaming variant."""
    paths = scored_paths(z, labels)
    T, U = z.shape[0], len(labels)
    gates = oracle_gates(z, labels)
    out = []
    for u in range(1, U + 1):
        col = [gates[t][u - 1] for t in range(T)]
        tau_star = col.index(max(col)) + 1
        terms = [p.log_prob + math.log(risk_streaming(p.emission_frame(u), tau_star, T, spec.lam))
                 for p in paths]
        out.append(_neg_log(terms))
    return out


def oracle_loss(z, labels, spec=None):
    """``-log sum_pi P(pi|x) r(pi)`` evaluated path by path."""
    spec = spec or RiskSpec()
    paths = scored_paths(z, labels)
    T, U = z.shape[0], len(labels)
    if spec.variant is Variant.UNIT:
        return _neg_log([p.log_prob for p in paths])
    if U == 0:
        raise ContractViolation("risk-weighted losses need at least one label")
    if spec.variant is Variant.OFFLINE:
        return _neg_log([p.log_prob + math.log(risk_offline(p.last_emission_frame, U, T, spec.lam, spec.m))
                         for p in paths])
    token_losses = oracle_token_losses(z, labels, spec)
    return sum(token_losses) / U


def oracle_best_path(z, labels):
    """Most probable path; ties go to the earliest emission-frame vector."""
    paths = scored_paths(z, labels)
    return max(paths, key=lambda p: (p.log_prob, [-f for f in p.emission_frames()]))
