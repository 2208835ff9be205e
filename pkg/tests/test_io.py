import io
import struct

import numpy as np
import pytest

from brt._validation import ContractViolation
from brt.io import load_dataset, load_model, read_lattice, save_dataset, save_model, write_lattice
from brt.toy import BRTTransducer, generate_dataset
from conftest import random_lattice


def test_lattice_layout(rng):
    z, labels = random_lattice(rng, 3, 2, 4)
    buf = io.BytesIO()
    write_lattice(buf, z, labels)
    raw = buf.getvalue()
    assert raw[:4] == b"BRTL"
    assert struct.unpack("<4I", raw[4:20]) == (1, 3, 2, 4)
    assert list(np.frombuffer(raw[20:28], dtype="<u4")) == list(labels)
    assert len(raw) == 28 + 8 * 3 * 3 * 5
    np.testing.assert_array_equal(np.frombuffer(raw[28:], dtype="<f8"), z.ravel())
    z2, l2 = read_lattice(io.BytesIO(raw))
    np.testing.assert_array_equal(z2, z)
    np.testing.assert_array_equal(l2, labels)


def test_lattice_rejects_corruption(rng):
    z, labels = random_lattice(rng, 2, 1, 2)
    buf = io.BytesIO()
    write_lattice(buf, z, labels)
    raw = buf.getvalue()
    with pytest.raises(ContractViolation):
        read_lattice(io.BytesIO(b"XXXX" + raw[4:]))
    with pytest.raises(ContractViolation):
        read_lattice(io.BytesIO(raw[:-3]))
    with pytest.raises(ContractViolation):
        read_lattice(io.BytesIO(raw[:4] + struct.pack("<I", 2) + raw[8:]))


def test_dataset_round_trip():
    utts = generate_dataset(5, seed=3)
    buf = io.BytesIO()
    save_dataset(buf, utts, {"seed": 3})
    assert buf.getvalue()[:4] == b"BRTD"
    back, meta = load_dataset(io.BytesIO(buf.getvalue()))
    assert meta == {"seed": 3}
    for a, b in zip(utts, back):
        np.testing.assert_array_equal(a.features, b.features)
        assert tuple(a.labels) == tuple(b.labels)
        assert tuple(map(tuple, a.ref_spans)) == tuple(b.ref_spans)


def test_model_round_trip():
    utts = generate_dataset(6, seed=1)
    est = BRTTransducer(epochs=2, hidden=8).fit([u.features for u in utts], [u.labels for u in utts])
    buf = io.BytesIO()
    save_model(buf, est)
    assert buf.getvalue()[:4] == b"BRTM"
    back = load_model(io.BytesIO(buf.getvalue()))
    assert back.get_params() == est.get_params()
    assert back.loss_trace_ == list(est.loss_trace_)
    x = utts[0].features
    np.testing.assert_array_equal(back.lattice_logits(x, utts[0].labels), est.lattice_logits(x, utts[0].labels))
    with pytest.raises(ContractViolation):
        load_model(io.BytesIO(b"BRTD" + buf.getvalue()[4:]))
