"""SCCM1 container for dense symmetric matrices.

Layout: the 5 magic bytes ``SCCM1``, the dimension as a decimal ASCII line
(``b"3\\n"``), then the lower triangle in row-major order as little-endian
IEEE-754 float64 values. Nothing may follow the payload.
"""

from __future__ import annotations

import numpy as np

from .errors import FormatError
from .linalg import SymMatrix

MAGIC = b"SCCM1"
_MAX_DIM_DIGITS = 12


def encode_matrix(M) -> bytes:
    A = M.entries if isinstance(M, SymMatrix) else SymMatrix(M).entries
    d = A.shape[0]
    rows, cols = np.tril_indices(d)
    payload = np.ascontiguousarray(A[rows, cols], dtype="<f8").tobytes()
    return MAGIC + f"{d}\n".encode("ascii") + payload


def decode_matrix(blob: bytes) -> SymMatrix:
    if not blob.startswith(MAGIC):
        raise FormatError("bad magic: not an SCCM1 file")
    nl = blob.find(b"\n", len(MAGIC), len(MAGIC) + _MAX_DIM_DIGITS + 1)
    if nl < 0:
        raise FormatError("missing dimension line")
    field = blob[len(MAGIC):nl]
    if not field.isdigit():
        raise FormatError(f"bad dimension field {field!r}")
    d = int(field)
    if d < 1:
        raise FormatError("dimension must be positive")
    n = d * (d + 1) // 2
    body = blob[nl + 1:]
    if len(body) != 8 * n:
        raise FormatError(f"payload has {len(body)} bytes, expected {8 * n}")
    vals = np.frombuffer(body, dtype="<f8").astype(float)
    A = np.zeros((d, d))
    rows, cols = np.tril_indices(d)
    A[rows, cols] = vals
    A[cols, rows] = vals
    return SymMatrix(A)


def write_matrix(path, M) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_matrix(M))


def read_matrix(path) -> SymMatrix:
    with open(path, "rb") as fh:
        return decode_matrix(fh.read())
