import io
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brt._validation import ContractViolation
from brt.decoder import DecodeResult, Hypothesis
from brt.metrics import (REPORT_COLUMNS, UndefinedMetric, drift_latency, edit_distance,
                         format_value, hypothesis_drift_latency, matched_positions, mean_df,
                         overall_latency, wer, write_report)

seqs = st.lists(st.integers(1, 4), max_size=8)


def recursive_distance(a, b):
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0 or j == 0:
            return i + j
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))
    return d(len(a), len(b))


def test_edit_distance_examples():
    assert edit_distance([1, 2, 3], [1, 2, 3]) == 0
    assert edit_distance([1, 2, 3], []) == 3
    assert edit_distance([], [5]) == 1
    assert edit_distance("kitten", "sitting") == 3


@settings(max_examples=300, deadline=None)
@given(seqs, seqs)
def test_edit_distance_matches_recursion(a, b):
    assert edit_distance(a, b) == recursive_distance(a, b)


@settings(max_examples=300, deadline=None)
@given(seqs, seqs, seqs)
def test_edit_distance_metric_axioms(a, b, c):
    assert edit_distance(a, b) == edit_distance(b, a)
    assert (edit_distance(a, b) == 0) == (a == b)
    assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)


def test_wer_examples():
    assert wer([[1, 2], [3]], [[1, 2], [3]]) == 0.0
    assert wer([[1, 2]], [[1, 3]]) == 50.0


def test_wer_pools_over_corpus(rng):
    refs = [list(rng.integers(1, 4, size=n)) for n in (3, 5, 2)]
    hyps = [list(rng.integers(1, 4, size=n)) for n in (4, 2, 2)]
    edits = sum(edit_distance(r, h) for r, h in zip(refs, hyps))
    assert wer(refs, hyps) == pytest.approx(100.0 * edits / 10)


def test_wer_errors():
    with pytest.raises(ContractViolation):
        wer([[]], [[1]])
    with pytest.raises(ContractViolation):
        wer([[1]], [])


def test_drift_latency_examples():
    assert drift_latency([4], [(1, 5)]) == ([3], 3.0)
    assert drift_latency([6], [(6, 9)]) == ([0], 0.0)
    assert drift_latency([5], [(6, 9)]) == ([-1], -1.0)
    per, mean = drift_latency([4, 9], [(1, 5), (6, 12)])
    assert per == [3, 3] and mean == 3.0
    with pytest.raises(UndefinedMetric):
        drift_latency([], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 30), st.integers(1, 30)), min_size=1, max_size=6),
       st.integers(-10, 10))
def test_drift_latency_shift_invariant(pairs, c):
    frames = [e for e, _ in pairs]
    spans = [(s, s + 3) for _, s in pairs]
    shifted = drift_latency([e + c for e in frames], [(a + c, b + c) for a, b in spans])
    assert shifted == drift_latency(frames, spans)


def test_hypothesis_drift_latency_skips_mismatches():
    # the hypothesis substitutes the middle token
    ref, spans = [1, 2, 3], [(1, 4), (5, 8), (9, 12)]
    assert matched_positions(ref, [1, 4, 3]) == [(0, 0), (2, 2)]
    per, mean = hypothesis_drift_latency(ref, spans, [1, 4, 3], [2, 6, 13])
    assert per == [1, 4] and mean == 2.5
    # a deletion keeps the remaining tokens paired with their own spans
    per, _ = hypothesis_drift_latency(ref, spans, [1, 3], [1, 10])
    assert per == [0, 1]
    with pytest.raises(UndefinedMetric):
        hypothesis_drift_latency(ref, spans, [4], [3])


def test_overall_latency_examples():
    assert overall_latency(160, 0) == 160
    assert overall_latency(320, 2, 40) == 400
    assert overall_latency(160, -1) == 120
    with pytest.raises(ContractViolation):
        overall_latency(160, 1, frame_ms=0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1000), st.floats(0, 1000), st.floats(-5, 5), st.floats(-5, 5), st.floats(0.5, 2))
def test_overall_latency_linear(d1, d2, l1, l2, a):
    lhs = overall_latency(a * d1 + d2, a * l1 + l2)
    rhs = a * overall_latency(d1, l1) + overall_latency(d2, l2)
    assert lhs == pytest.approx(rhs, abs=1e-8)


def test_mean_df():
    assert mean_df([30] * 7) == 30.0
    assert mean_df([10, 20]) == 15.0
    logs = np.random.default_rng(0).integers(1, 50, size=40)
    assert mean_df(list(logs)) == pytest.approx(sum(logs) / 40)
    res = DecodeResult(Hypothesis((), 0.0), [], 12, True)
    assert mean_df([res, res]) == 12.0
    with pytest.raises(ContractViolation):
        mean_df([])


def test_report_csv():
    row = {"experiment_id": "e1", "variant": "streaming", "lambda": 10.0, "seed": 0, "wer": 1 / 3,
           "mean_df": 20.0, "mean_dl_frames": 0.1, "dcl_ms": 320.0, "overall_latency_ms": 324.0}
    buf = io.StringIO()
    write_report(buf, [row])
    header, line = buf.getvalue().splitlines()
    assert header == ",".join(REPORT_COLUMNS)
    assert line == "e1,streaming,10,0,0.33333333333333331,20,0.10000000000000001,320,324"
    assert float(format_value(1 / 3)) == 1 / 3
