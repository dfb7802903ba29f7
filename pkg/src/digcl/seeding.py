"""Deterministic named random streams.

All randomness in the toolkit flows from integer seeds through keyed
sub-streams, so results never depend on iteration order, worker count,
or Python's salted ``hash``.  A stream key is an arbitrary tuple of
ints, floats and strings; it is hashed with BLAKE2b into entropy words
for a :class:`numpy.random.SeedSequence`.
"""

from __future__ import annotations

import hashlib
import struct
from typing import Iterable

import numpy as np

__all__ = ["key_digest", "stream", "derive_int", "uniform01", "uniform01_pair"]


def _encode(part) -> bytes:
    if isinstance(part, bool):
        return b"b1" if part else b"b0"
    if isinstance(part, (int, np.integer)):
        return b"i" + int(part).to_bytes(16, "little", signed=True)
    if isinstance(part, (float, np.floating)):
        return b"f" + struct.pack("<d", float(part))
    if isinstance(part, str):
        return b"s" + part.encode("utf-8")
    raise TypeError(f"unsupported stream key component: {type(part).__name__}")


def key_digest(*parts) -> bytes:
    """16-byte BLAKE2b digest of an encoded key tuple."""
    h = hashlib.blake2b(digest_size=16)
    for part in parts:
        h.update(_encode(part))
        h.update(b"\x1f")
    return h.digest()


def stream(*parts) -> np.random.Generator:
    """A fresh PCG64 generator keyed by ``parts``."""
    digest = key_digest(*parts)
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence(words))

def derive_int(*parts) -> int:
    """Stable 63-bit integer derived from a key tuple."""
    return int.from_bytes(key_digest(*parts)[:8], "little") >> 1


def uniform01(*parts) -> float:
    """One deterministic uniform draw in [0, 1) keyed by ``parts``."""
    return int.from_bytes(key_digest(*parts)[:8], "little") / 2.0**64


def uniform01_pair(*parts) -> tuple[float, float]:
    """Two independent uniform draws in [0, 1) keyed by ``parts``."""
    digest = key_digest(*parts)
    a = int.from_bytes(digest[:8], "little") / 2.0**64
    b = int.from_bytes(digest[8:], "little") / 2.0**64
    return a, b
