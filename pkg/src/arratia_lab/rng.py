"""Deterministic random streams.

Every stream is keyed by ``(seed, replica, particle)`` through numpy's
``SeedSequence``; nothing draws from a global generator. Two calls with the
same key always see the same numbers, regardless of how replicas are batched
or which worker evaluates them.
"""

from __future__ import annotations

import zlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def stream(seed: int, replica: int, particle: int) -> np.random.Generator:
    return np.random.default_rng([seed & SEED_MASK, replica, particle])


def derive_seed(master: int, tag: str) -> int:
    """64-bit sub-seed for a named experiment cell.

    The tag is hashed with CRC32 so the mapping is stable across Python
    versions (``hash`` is salted per process).
    """
    ss = np.random.SeedSequence([master & SEED_MASK, zlib.crc32(tag.encode())])
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)
