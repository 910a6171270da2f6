"""Binary (GTM1) and JSON containers for matrices and instances.

GTM1 layout, all little-endian::

    b"GTM1" | u64 n | u64 p | n * ceil(p/64) u64 row words

Row t's bit j sits in word j // 64 at position j % 64; padding bits are zero.
"""
import json
import struct

import numpy as np

from .exceptions import DimensionError, ParameterError
from .model import WORD_BITS, ProblemInstance, TestMatrix

MAGIC = b"GTM1"
_HEADER = struct.Struct("<4sQQ")


def matrix_to_bytes(matrix):
    body = np.ascontiguousarray(matrix.rows, dtype="<u8").tobytes()
    return _HEADER.pack(MAGIC, matrix.n, matrix.p) + body


def matrix_from_bytes(data):
    if len(data) < _HEADER.size:
        raise ParameterError("truncated GTM1 header")
    magic, n, p = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParameterError(f"bad magic {magic!r}, expected {MAGIC!r}")
    words = -(-p // WORD_BITS)
    expected = _HEADER.size + 8 * n * words
    if len(data) != expected:
        raise DimensionError(f"GTM1 body has {len(data)} bytes, expected {expected}")
    rows = np.frombuffer(data, dtype="<u8", offset=_HEADER.size).reshape(n, words)
    if p % WORD_BITS and n and (rows[:, -1] >> np.uint64(p % WORD_BITS)).any():
        raise ParameterError("non-zero padding bits in GTM1 rows")
    return TestMatrix.from_rows(n, p, rows)


def write_matrix(matrix, path):
    with open(path, "wb") as fh:
        fh.write(matrix_to_bytes(matrix))


def read_matrix(path):
    with open(path, "rb") as fh:
        return matrix_from_bytes(fh.read())


def matrix_to_json(matrix):
    dense = matrix.to_dense()
    rows = ["".join("1" if b else "0" for b in row) for row in dense]
    return json.dumps({"n": matrix.n, "p": matrix.p, "rows": rows})


def matrix_from_json(text):
    obj = json.loads(text)
    n, p, rows = obj["n"], obj["p"], obj["rows"]
    if len(rows) != n or any(len(r) != p for r in rows):
        raise DimensionError(f"JSON rows do not form a {n} x {p} matrix")
    if any(set(r) - {"0", "1"} for r in rows):
        raise ParameterError("JSON matrix rows must contain only '0' and '1'")
    dense = np.array([[c == "1" for c in r] for r in rows], dtype=bool).reshape(n, p)
    return TestMatrix.from_dense(dense)


def instance_to_json(instance):
    return json.dumps({"p": instance.p, "k": instance.k,
                       "defective_set": list(instance.defective_set)})


def instance_from_json(text):
    obj = json.loads(text)
    return ProblemInstance(obj["p"], obj["k"], tuple(obj["defective_set"]))
