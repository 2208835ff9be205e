"""Frame-synchronous transducer beam search with an early-stop rule.

A score function ``score_fn(t, prefix)`` returns the normalized log
distribution over ``V+1`` symbols (blank first) at 0-based frame ``t`` given
the blank-free ``prefix`` (a tuple of label ids).
"""

import csv
import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import BLANK, ContractViolation
from .numerics import log_add


@dataclass(frozen=True)
class Hypothesis:
    prefix: tuple
    log_score: float
    complete: bool = False


@dataclass(frozen=True)
class EarlyStopConfig:
    enabled: bool = False
    D: float = -10.0
    k: int = 3
    f: int = 5

    def __post_init__(self):
        if self.k < 1 or self.f < 1:
            raise ContractViolation("early stop needs k >= 1 and f >= 1")


class DecodeResult(NamedTuple):
    best: Hypothesis
    n_best: list
    frames_decoded: int
    stopped_early: bool


def _checked(scores, V1=None):
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or (V1 is not None and scores.shape[0] != V1):
        raise ContractViolation(f"score_fn returned shape {scores.shape}")
    if np.isnan(scores).any():
        raise ContractViolation("score_fn returned NaN")
    m = scores.max()
    if abs(m + math.log(np.exp(scores - m).sum())) > 1e-6:
        raise ContractViolation("score_fn returned an unnormalized distribution")
    return scores


def completeness_check(score_fn, prefix, tau, T, D=-10.0):
    """True iff ``sum_{t=tau}^{T} log p(blank | t, prefix) > D`` (1-based frames)."""
    total = 0.0
    for t in range(tau - 1, T):
        total += float(score_fn(t, prefix)[BLANK])
        if total <= D:
            return False
    return total > D


class EarlyStopMonitor:
    """Tracks the ranked top-k prefixes frame by frame.

    Fires once the ordered top-k list has been identical for ``f``
    consecutive frames and every one of those hypotheses is complete.
    """

    def __init__(self, config):
        self.config = config
        self.history = deque(maxlen=config.f)

    def update(self, ranked):
        """Push the current ranked beam (list of :class:`Hypothesis`); return the stop decision."""
        top = ranked[:self.config.k]
        self.history.append(tuple(h.prefix for h in top))
        if len(self.history) < self.config.f:
            return False
        if any(entry != self.history[-1] for entry in self.history):
            return False
        return all(h.complete for h in top)


def early_stop_monitor(beam_history, config):
    """Stateless form of :class:`EarlyStopMonitor` over a list of ranked beams."""
    monitor = EarlyStopMonitor(config)
    decision = False
    for ranked in beam_history:
        decision = monitor.update(ranked)
    return decision


def _top(scored, beam):
    items = [(p, s) for p, s in scored.items() if s > -math.inf]
    items.sort(key=lambda ps: (-ps[1], len(ps[0]), ps[0]))
    return items[:beam]


def _ranked(items, score_fn, t, T, es):
    if not es.enabled:
        return [Hypothesis(p, s) for p, s in items]
    k = min(es.k, len(items))
    return [Hypothesis(p, s, i < k and completeness_check(score_fn, p, t + 1, T, es.D))
            for i, (p, s) in enumerate(items)]


def greedy_search(score_fn, T, early_stop=None, max_symbols_per_frame=3):
    """Follow the single most likely symbol at every step."""
    es = early_stop or EarlyStopConfig()
    monitor = EarlyStopMonitor(es) if es.enabled else None
    prefix, score = (), 0.0
    for t in range(T):
        emitted = 0
        while True:
            lp = _checked(score_fn(t, prefix))
            k = int(np.argmax(lp)) if emitted < max_symbols_per_frame else BLANK
            score += float(lp[k])
            if k == BLANK:
                break
            prefix += (k,)
            emitted += 1
        ranked = _ranked([(prefix, score)], score_fn, t, T, es)
        if monitor is not None and monitor.update(ranked):
            return DecodeResult(ranked[0], ranked, t + 1, t + 1 < T)
    hyp = Hypothesis(prefix, score, True)
    return DecodeResult(hyp, [hyp], T, False)


def beam_search(score_fn, T, beam=10, early_stop=None, max_symbols_per_frame=3, merge="sum"):
    """Beam search over blank-free prefixes, one frame at a time.

    Within a frame, hypotheses may emit up to ``max_symbols_per_frame``
    labels before the blank that advances to the next frame. Paths reaching
    the same prefix are merged by log-sum (``merge="sum"``) or by max
    (``merge="max"``). ``beam=1`` runs greedy search.
    """
    if beam < 1:
        raise ContractViolation("beam must be >= 1")
    if merge not in ("sum", "max"):
        raise ContractViolation(f"unknown merge mode {merge!r}")
    es = early_stop or EarlyStopConfig()
    if beam == 1:
        return greedy_search(score_fn, T, es, max_symbols_per_frame)
    combine = log_add if merge == "sum" else max
    monitor = EarlyStopMonitor(es) if es.enabled else None
    cache = {}

    def scores(t, prefix):
        key = (t, prefix)
        if key not in cache:
            cache[key] = _checked(score_fn(t, prefix))
        return cache[key]

    hyps = [((), 0.0)]
    ranked = [Hypothesis((), 0.0)]
    for t in range(T):
        cache = {k: v for k, v in cache.items() if k[0] >= t}
        # mass at frame t after any number of emissions, before the blank
        mass = dict(hyps)
        frontier = hyps
        for _ in range(max_symbols_per_frame):
            grown = {}
            for prefix, s in frontier:
                lp = scores(t, prefix)
                for k in range(1, lp.shape[0]):
                    if lp[k] > -math.inf:
                        key = prefix + (k,)
                        grown[key] = combine(grown[key], s + lp[k]) if key in grown else s + lp[k]
            frontier = _top(grown, beam)
            for prefix, s in frontier:
                mass[prefix] = combine(mass[prefix], s) if prefix in mass else s
            if not frontier:
                break
        advanced = {p: s + scores(t, p)[BLANK] for p, s in mass.items()}
        hyps = _top(advanced, beam)
        if not hyps:
            raise ContractViolation("every hypothesis has zero probability")
        if monitor is not None:
            ranked = _ranked(hyps, scores, t, T, es)
            if monitor.update(ranked):
                return DecodeResult(ranked[0], ranked, t + 1, t + 1 < T)
    n_best = [Hypothesis(p, s, True) for p, s in hyps]
    return DecodeResult(n_best[0], n_best, T, False)


def write_decode_log(fh, rows):
    """Write ``(utt_id, DecodeResult)`` pairs as the decode-log CSV."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["utt_id", "frames_decoded", "stopped_early", "best_prefix", "best_log_score"])
    for utt_id, res in rows:
        writer.writerow([utt_id, res.frames_decoded, int(res.stopped_early),
                         " ".join(str(v) for v in res.best.prefix), repr(float(res.best.log_score))])
