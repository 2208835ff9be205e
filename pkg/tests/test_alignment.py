import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brt._validation import BLANK, ContractViolation
from brt.alignment import emission_times, viterbi_align, write_alignment_csv
from brt.oracle import Path, oracle_best_path
from conftest import planted_lattice, random_lattice


def test_planted_path_recovered():
    z = planted_lattice(7, [3, 1, 2], [1, 4, 7], V=3)
    path = viterbi_align(z, [3, 1, 2])
    assert emission_times(path) == [1, 4, 7]
    assert path.log_prob == 0.0


def test_unique_path(rng):
    z, labels = random_lattice(rng, 1, 1, 3)
    path = viterbi_align(z, labels)
    assert path.symbols == (labels[0], BLANK)
    assert path.log_prob == pytest.approx(z[0, 0, labels[0]] + z[0, 1, 0])


def test_agrees_with_oracle(rng):
    for _ in range(100):
        T, U = int(rng.integers(1, 6)), int(rng.integers(0, 4))
        z, labels = random_lattice(rng, T, U, 4)
        got, ref = viterbi_align(z, labels), oracle_best_path(z, labels)
        assert got.log_prob == pytest.approx(ref.log_prob, abs=1e-10)
        assert emission_times(got) == list(ref.emission_frames())


def test_ties_prefer_earliest_emission():
    # a uniform two-symbol lattice makes every path equally likely
    z = np.log(np.full((4, 3, 2), 0.5))
    assert emission_times(viterbi_align(z, [1, 1])) == [1, 1]


def test_emission_times_examples():
    assert emission_times(Path((5, 0))) == [1]
    assert emission_times((0, 0, 1, 2, 0)) == [3, 3]
    with pytest.raises(ContractViolation):
        emission_times((0, 1))
    with pytest.raises(ContractViolation):
        emission_times(())


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 4), max_size=12))
def test_emission_times_match_blank_scan(body):
    symbols = tuple(body) + (BLANK,)
    expected, blanks = [], 0
    for s in symbols:
        if s == BLANK:
            blanks += 1
        else:
            expected.append(blanks + 1)
    assert emission_times(symbols) == expected


def test_alignment_csv():
    buf = io.StringIO()
    write_alignment_csv(buf, [("u1", Path((0, 2, 0, 3, 0)))])
    assert buf.getvalue().splitlines() == [
        "utt_id,u,label_id,emission_frame", "u1,1,2,2", "u1,2,3,3"]
