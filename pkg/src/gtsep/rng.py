"""Counter-based random streams keyed by (master seed, labels).

Every random draw in the package goes through :func:`stream`, so a result
depends only on the seed and the labels naming the draw, never on call order
or on how work is scheduled across threads.
"""
import hashlib
import struct

import numpy as np


def _encode(label):
    if isinstance(label, (bool, np.bool_)):
        raise TypeError("boolean stream labels are ambiguous")
    if isinstance(label, (int, np.integer)):
        return b"i" + str(int(label)).encode() + b";"
    if isinstance(label, str):
        raw = label.encode("utf-8")
        return b"s" + struct.pack("<I", len(raw)) + raw
    raise TypeError(f"unsupported stream label type: {type(label).__name__}")


def derive_key(master_seed, *labels):
    """128-bit key from an integer seed (any width) and a tuple of labels."""
    h = hashlib.blake2b(digest_size=16, person=b"gtsep-stream")
    h.update(_encode(int(master_seed)))
    for label in labels:
        h.update(_encode(label))
    return int.from_bytes(h.digest(), "little")


def stream(master_seed, *labels):
    """A fresh Philox generator for the named stream."""
    return np.random.Generator(np.random.Philox(key=derive_key(master_seed, *labels)))
