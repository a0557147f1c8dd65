"""Deterministic seed derivation for reproducible experiment trees.

Every randomized component takes a 64-bit seed. Nested work units (sweep
cells, replicates, annealing chains) derive their own seeds by hashing the
parent seed together with their coordinates, so any sub-result can be
re-derived in isolation.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(*parts) -> int:
    """Hash a tuple of ints, floats, and strings into a 64-bit seed.

    Parts are tagged by type before hashing, so derive_seed(1) and
    derive_seed("1") differ, and floats are hashed by exact bit pattern
    (negative zero is normalized first).
    """
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, (bool, np.bool_)):
            h.update(b"b" + bytes([int(part)]))
        elif isinstance(part, (int, np.integer)):
            h.update(b"i" + str(int(part)).encode("ascii"))
        elif isinstance(part, (float, np.floating)):
            h.update(b"f" + struct.pack("<d", float(part) + 0.0))
        elif isinstance(part, str):
            h.update(b"s" + part.encode("utf-8"))
        else:
            raise TypeError(f"unsupported seed part: {part!r}")
        h.update(b"\x00")
    return int.from_bytes(h.digest()[:8], "little") & _MASK64


def rng_from(*parts) -> np.random.Generator:
    """PCG64 generator seeded from derive_seed(*parts)."""
    return np.random.default_rng(derive_seed(*parts))
