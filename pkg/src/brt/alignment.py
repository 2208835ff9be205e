"""Viterbi alignment and emission times."""

import csv

from . import _kernels
from ._validation import BLANK, ContractViolation, check_lattice
from .lattice import arc_scores
from .oracle import Path


def viterbi_align(z, labels):
    """Highest-posterior valid path through the lattice.

    Among equally scored paths the one emitting labels earliest (compared
    token by token) is returned.
    """
    z, labels = check_lattice(z, labels)
    blank, emit = arc_scores(z, labels)
    best = _kernels.viterbi_suffix(blank, emit)
    T, U1 = blank.shape
    t = u = 0
    symbols = []
    while True:
        can_emit = u < U1 - 1
        can_blank = t < T - 1 or u == U1 - 1
        if can_emit:
            via_label = emit[t, u] + best[t, u + 1]
        if can_blank:
            via_blank = blank[t, u] + (best[t + 1, u] if t < T - 1 else 0.0)
        if can_emit and (not can_blank or via_label >= via_blank):
            symbols.append(int(labels[u]))
            u += 1
        else:
            symbols.append(BLANK)
            if t == T - 1:
                break
            t += 1
    return Path(tuple(symbols), float(best[0, 0]))


def emission_times(path):
    """1-based frame at which each label of ``path`` is emitted."""
    symbols = path.symbols if isinstance(path, Path) else tuple(path)
    if not symbols or symbols[-1] != BLANK:
        raise ContractViolation("a path must end with a blank")
    frame = 1
    times = []
    for s in symbols[:-1]:
        if s == BLANK:
            frame += 1
        elif s < 0:
            raise ContractViolation(f"invalid symbol {s}")
        else:
            times.append(frame)
    return times


def write_alignment_csv(fh, rows):
    """Write ``(utt_id, path)`` pairs as ``utt_id,u,label_id,emission_frame`` rows."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["utt_id", "u", "label_id", "emission_frame"])
    for utt_id, path in rows:
        labels = [s for s in path.symbols if s != BLANK]
        for u, (lab, frame) in enumerate(zip(labels, emission_times(path)), start=1):
            writer.writerow([utt_id, u, lab, frame])
