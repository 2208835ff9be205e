"""Binary containers: lattices (``BRTL``), model checkpoints (``BRTM``), datasets (``BRTD``).

Everything is little-endian. ``BRTL`` is a fixed layout; ``BRTM`` and ``BRTD``
share a container of ``magic | u32 version | u32 header length | JSON header |
float64 arrays`` where the header lists each array's name and shape in
storage order.
"""

import json
import struct

import numpy as np

from ._validation import ContractViolation, check_lattice

VERSION = 1


def _read_exact(fh, n):
    buf = fh.read(n)
    if len(buf) != n:
        raise ContractViolation("unexpected end of file")
    return buf


def write_lattice(fh, z, labels):
    z, labels = check_lattice(z, labels)
    T, U1, V1 = z.shape
    fh.write(b"BRTL")
    fh.write(struct.pack("<4I", VERSION, T, U1 - 1, V1 - 1))
    fh.write(np.asarray(labels, dtype="<u4").tobytes())
    fh.write(np.ascontiguousarray(z, dtype="<f8").tobytes())


def read_lattice(fh):
    """Return ``(z, labels)`` from a ``BRTL`` stream."""
    if _read_exact(fh, 4) != b"BRTL":
        raise ContractViolation("not a BRTL lattice file")
    version, T, U, V = struct.unpack("<4I", _read_exact(fh, 16))
    if version != VERSION:
        raise ContractViolation(f"unsupported lattice version {version}")
    labels = np.frombuffer(_read_exact(fh, 4 * U), dtype="<u4").astype(np.int64)
    n = T * (U + 1) * (V + 1)
    z = np.frombuffer(_read_exact(fh, 8 * n), dtype="<f8").reshape(T, U + 1, V + 1).copy()
    return check_lattice(z, labels)


def _write_container(fh, magic, header, arrays):
    header = dict(header)
    header["arrays"] = [[name, list(a.shape)] for name, a in arrays]
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    fh.write(magic)
    fh.write(struct.pack("<2I", VERSION, len(blob)))
    fh.write(blob)
    for _, a in arrays:
        fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def _read_container(fh, magic):
    if _read_exact(fh, 4) != magic:
        raise ContractViolation(f"not a {magic.decode()} file")
    version, n = struct.unpack("<2I", _read_exact(fh, 8))
    if version != VERSION:
        raise ContractViolation(f"unsupported {magic.decode()} version {version}")
    header = json.loads(_read_exact(fh, n).decode("utf-8"))
    arrays = {}
    for name, shape in header.pop("arrays"):
        count = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8").reshape(shape).copy()
    return header, arrays


def save_model(fh, estimator):
    """Write a fitted :class:`~brt.toy.BRTTransducer` as ``BRTM``."""
    from .toy import PARAM_NAMES
    header = {
        "params": estimator.get_params(),
        "vocab_size": estimator.vocab_size_,
        "n_features_in": estimator.n_features_in_,
        "loss_trace": [float(v) for v in estimator.loss_trace_],
    }
    _write_container(fh, b"BRTM", header, [(k, estimator.params_[k]) for k in PARAM_NAMES])


def load_model(fh):
    from .toy import BRTTransducer
    header, arrays = _read_container(fh, b"BRTM")
    est = BRTTransducer(**header["params"])
    est.params_ = arrays
    est.vocab_size_ = header["vocab_size"]
    est.n_features_in_ = header["n_features_in"]
    est.loss_trace_ = header["loss_trace"]
    return est


def save_dataset(fh, utts, meta=None):
    header = {
        "meta": meta or {},
        "labels": [list(u.labels) for u in utts],
        "ref_spans": [[list(s) for s in u.ref_spans] for u in utts],
    }
    _write_container(fh, b"BRTD", header, [(f"x{i}", u.features) for i, u in enumerate(utts)])


def load_dataset(fh):
    """Return ``(utterances, meta)`` from a ``BRTD`` stream."""
    from .toy import ToyUtterance
    header, arrays = _read_container(fh, b"BRTD")
    utts = [ToyUtterance(arrays[f"x{i}"], tuple(labels), tuple(tuple(s) for s in spans))
            for i, (labels, spans) in enumerate(zip(header["labels"], header["ref_spans"]))]
    return utts, header["meta"]
