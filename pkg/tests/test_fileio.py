import json

import numpy as np
import pytest

from symtest.errors import ValidationError
from symtest.fileio import (
    cmat_b64,
    cmat_dumps,
    cmat_from_b64,
    cmat_loads,
    read_cmat,
    read_state,
    state_from_json,
    write_cmat,
    write_state,
)


def test_cmat_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    path = tmp_path / "a.cmat"
    write_cmat(path, a, omega={"m": 1})
    b, header = read_cmat(path)
    assert np.abs(a - b).max() == 0
    assert header["format"] == "CMAT1"
    assert (header["rows"], header["cols"], header["hermitian"]) == (3, 5, False)
    assert header["omega"] == {"m": 1}


def test_cmat_layout():
    a = np.array([[1 + 2j, 3], [4, 5 - 1j]])
    blob = cmat_dumps(a)
    head, body = blob.split(b"\n", 1)
    assert json.loads(head)["hermitian"] is False
    vals = np.frombuffer(body, dtype="<f8")
    assert list(vals) == [1, 2, 3, 0, 4, 0, 5, -1]
    assert json.loads(cmat_dumps(np.eye(2)).split(b"\n", 1)[0])["hermitian"] is True


def test_cmat_rejects_bad_blobs():
    blob = cmat_dumps(np.eye(2))
    with pytest.raises(ValidationError):
        cmat_loads(blob[:-1])
    with pytest.raises(ValidationError):
        cmat_loads(b"no header")
    with pytest.raises(ValidationError):
        cmat_loads(b'{"format":"X","rows":1,"cols":1}\n' + bytes(16))


def test_cmat_b64():
    a = np.array([[0, 1j], [-1j, 0]])
    assert np.abs(cmat_from_b64(cmat_b64(a)) - a).max() == 0


def test_state_json(tmp_path):
    psi = np.array([0.6, 0.8j])
    path = tmp_path / "s.json"
    write_state(path, psi)
    obj = json.loads(path.read_text())
    assert obj == {"dim": 2, "amplitudes": [[0.6, 0.0], [0.0, 0.8]]}
    assert np.abs(read_state(path) - psi).max() == 0
    with pytest.raises(ValidationError):
        state_from_json({"dim": 3, "amplitudes": [[1, 0]]})
