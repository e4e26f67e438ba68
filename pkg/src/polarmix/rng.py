"""Deterministic pseudo-random streams.

All randomness in the package derives from SplitMix64, a counter-based
64-bit generator.  Output number ``k`` (``k = 0, 1, ...``) of the stream
with seed ``s`` is

    z = (s + (k + 1) * 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    z = z ^ (z >> 31)

which is pure integer arithmetic and therefore identical on every
platform.  Bulk sampling (channel noise, messages) uses numpy's Philox
counter-based generator keyed by a SplitMix64-derived seed, which is
also platform independent.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def splitmix64(seed: int, counter: int) -> int:
    """Return output number ``counter`` of the SplitMix64 stream ``seed``."""
    return _mix((seed + (counter + 1) * GOLDEN) & MASK64)


def derive_seed(seed: int, *keys: int) -> int:
    """Hash a master seed and a tuple of non-negative integers to a new seed."""
    s = seed & MASK64
    for k in keys:
        s = splitmix64(s, int(k) & MASK64)
    return s


def random_bits(seed: int, count: int) -> np.ndarray:
    """First ``count`` bits of the stream, least significant bit of each word first."""
    words = -(-count // 64)
    out = np.empty(words * 64, dtype=np.uint8)
    for w in range(words):
        z = splitmix64(seed, w)
        out[w * 64:(w + 1) * 64] = [(z >> b) & 1 for b in range(64)]
    return out[:count]


def philox(seed: int) -> np.random.Generator:
    """numpy Generator on a Philox bit generator keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(key=seed & MASK64))
