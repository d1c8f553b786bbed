"""Counter-based random streams.

Every draw is keyed by (master seed, block index, purpose), so a batch gives
the same numbers whatever order or thread its blocks run in.
"""
from __future__ import annotations

import numpy as np

BLOCK = 8192

PURPOSE = {
    "state": 0,
    "precision": 1,
    "signal": 2,
    "threshold": 3,
    "direction": 4,
    "target": 5,
    "noise": 6,
    "tie": 7,
    "cycle": 8,
    "population": 9,
    "bootstrap": 10,
    "permutation": 11,
    "synthetic": 12,
}


def stream(seed: int, block: int, purpose: str, *extra: int) -> np.random.Generator:
    key = (int(block), PURPOSE[purpose], *map(int, extra))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


def blocks(n: int, size: int = BLOCK):
    """Yield ``(block_index, start, stop)`` covering ``range(n)``."""
    for b, start in enumerate(range(0, n, size)):
        yield b, start, min(n, start + size)
