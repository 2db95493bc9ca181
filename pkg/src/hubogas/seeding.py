"""Counter-based seed derivation.

Every random stream is ``SeedSequence(seed, spawn_key=keys)`` for a master
64-bit seed and a tuple of small integers (trial index, SNR slot, ...), so a
trial draws the same numbers no matter which worker runs it or in what order.
"""
from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    value = int(part)
    if value < 0:
        raise ValueError("seed keys must be non-negative")
    return value


def stream(seed: int, *keys) -> np.random.Generator:
    """Generator for ``(seed, *keys)``; strings are hashed to stable integers."""
    return np.random.default_rng(np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(_key(k) for k in keys)))


def seed_from(rng_or_seed) -> int:
    """Accept either a seed or a Generator and return a 64-bit master seed."""
    if isinstance(rng_or_seed, np.random.Generator):
        return int(rng_or_seed.integers(0, 1 << 63))
    return int(rng_or_seed) & MASK64
