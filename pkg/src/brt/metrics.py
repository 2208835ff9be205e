"""Accuracy and latency metrics: WER, decoding frames, drift latency."""

import csv

import numpy as np

from ._validation import ContractViolation


class UndefinedMetric(ValueError):
    pass


def edit_distance(ref, hyp):
    """Levenshtein distance with unit substitution, insertion and deletion costs."""
    ref, hyp = list(ref), list(hyp)
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, start=1):
        cur = [i] + [0] * len(hyp)
        for j, h in enumerate(hyp, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h))
        prev = cur
    return prev[-1]


def wer(refs, hyps):
    """Corpus-level error rate in percent: total edits over total reference tokens."""
    if len(refs) != len(hyps):
        raise ContractViolation(f"{len(refs)} references but {len(hyps)} hypotheses")
    n_ref = sum(len(r) for r in refs)
    if n_ref == 0:
        raise ContractViolation("reference corpus has no tokens")
    return 100.0 * sum(edit_distance(r, h) for r, h in zip(refs, hyps)) / n_ref


def matched_positions(ref, hyp):
    """Pairs ``(i, j)`` where ``ref[i] == hyp[j]`` on a minimum edit-distance alignment."""
    ref, hyp = list(ref), list(hyp)
    n, m = len(ref), len(hyp)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i, j] = min(d[i - 1, j] + 1, d[i, j - 1] + 1,
                          d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]))
    pairs = []
    i, j = n, m
    while i > 0 and j > 0:
        if ref[i - 1] == hyp[j - 1] and d[i, j] == d[i - 1, j - 1]:
            pairs.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif d[i, j] == d[i - 1, j - 1] + 1:
            i, j = i - 1, j - 1
        elif d[i, j] == d[i - 1, j] + 1:
            i -= 1
        else:
            j -= 1
    return pairs[::-1]


def drift_latency(emission_frames, ref_spans):
    """Per-token drift latency (emission frame minus reference start frame) and its mean.

    Both arguments are per-token and already matched position by position.
    Values can be negative when a token is emitted before its span starts.
    """
    if len(emission_frames) != len(ref_spans):
        raise ContractViolation("emission frames and reference spans differ in length")
    if len(emission_frames) == 0:
        raise UndefinedMetric("no tokens contribute to drift latency")
    per_token = [int(e) - int(span[0]) for e, span in zip(emission_frames, ref_spans)]
    return per_token, float(np.mean(per_token))


def hypothesis_drift_latency(ref_labels, ref_spans, hyp_labels, hyp_frames):
    """Drift latency over hypothesis tokens that match the reference after edit alignment."""
    pairs = matched_positions(ref_labels, hyp_labels)
    return drift_latency([hyp_frames[j] for _, j in pairs], [ref_spans[i] for i, _ in pairs])


def overall_latency(dcl_ms, mean_dl_frames, frame_ms=40.0):
    """Data-collecting latency plus drift latency, in milliseconds."""
    if frame_ms <= 0:
        raise ContractViolation("frame_ms must be positive")
    return dcl_ms + mean_dl_frames * frame_ms


def mean_df(frames_decoded):
    """Average number of frames decoded before termination."""
    vals = [getattr(x, "frames_decoded", x) for x in frames_decoded]
    if not vals:
        raise ContractViolation("no decode logs")
    return float(np.mean(vals))


REPORT_COLUMNS = ("experiment_id", "variant", "lambda", "seed", "wer", "mean_df",
                  "mean_dl_frames", "dcl_ms", "overall_latency_ms")


def format_value(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_report(fh, rows, columns=REPORT_COLUMNS):
    """Write dict rows to CSV with a fixed column order and 17-digit floats."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in columns])
