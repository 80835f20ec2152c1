"""Matrix (CMAT1) and state (JSON) file formats.

A CMAT1 blob is one line of UTF-8 JSON header terminated by ``\\n``,
followed by ``rows * cols`` little-endian float64 ``(re, im)`` pairs in
row-major order. The header always carries ``format``, ``rows``, ``cols``
and ``hermitian``; writers may add keys (performance operators add an
``omega`` object).
"""
import base64
import json

import numpy as np

from .errors import ValidationError
from .tensor import is_hermitian

_DTYPE = np.dtype("<c16")


def cmat_dumps(a, hermitian=None, **extra):
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise ValidationError("CMAT1 stores 2-D matrices only")
    if hermitian is None:
        hermitian = bool(is_hermitian(a))
    header = {"format": "CMAT1", "rows": a.shape[0], "cols": a.shape[1], "hermitian": bool(hermitian)}
    header.update(extra)
    head = json.dumps(header, separators=(",", ":")).encode("utf-8") + b"\n"
    return head + np.ascontiguousarray(a, dtype=_DTYPE).tobytes()


def cmat_loads(blob):
    """Parse a CMAT1 blob; returns ``(matrix, header)``."""
    nl = blob.find(b"\n")
    if nl < 0:
        raise ValidationError("CMAT1 header line missing")
    try:
        header = json.loads(blob[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError("bad CMAT1 header: %s" % exc) from exc
    if header.get("format") != "CMAT1":
        raise ValidationError("not a CMAT1 blob")
    rows, cols = int(header["rows"]), int(header["cols"])
    body = blob[nl + 1 :]
    if len(body) != rows * cols * _DTYPE.itemsize:
        raise ValidationError(
            "CMAT1 payload has %d bytes, expected %d" % (len(body), rows * cols * _DTYPE.itemsize)
        )
    a = np.frombuffer(body, dtype=_DTYPE).astype(complex).reshape(rows, cols)
    return a, header


def write_cmat(path, a, hermitian=None, **extra):
    with open(path, "wb") as fh:
        fh.write(cmat_dumps(a, hermitian=hermitian, **extra))


def read_cmat(path):
    with open(path, "rb") as fh:
        return cmat_loads(fh.read())


def cmat_b64(a):
    return base64.b64encode(cmat_dumps(a)).decode("ascii")


def cmat_from_b64(text):
    return cmat_loads(base64.b64decode(text))[0]


def state_to_json(psi):
    psi = np.asarray(psi, dtype=complex).ravel()
    return {"dim": int(psi.size), "amplitudes": [[float(z.real), float(z.imag)] for z in psi]}


def state_from_json(obj):
    amps = obj["amplitudes"]
    psi = np.array([complex(re, im) for re, im in amps], dtype=complex)
    if psi.size != int(obj["dim"]):
        raise ValidationError("state 'dim' is %s but %d amplitudes given" % (obj["dim"], psi.size))
    return psi


def write_state(path, psi):
    with open(path, "w") as fh:
        json.dump(state_to_json(psi), fh)


def read_state(path):
    with open(path) as fh:
        return state_from_json(json.load(fh))
