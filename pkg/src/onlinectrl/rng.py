"""Counter-based random number generation.

Every stochastic object in the package (noise processes, random cost
schedules) draws from a Philox generator keyed by (seed, stream, step).
A draw for step t never depends on draws for other steps, so episodes
replay bit-identically and steps can be generated out of order or in
parallel.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Stream ids keep independent consumers of the same seed apart.
STREAM_NOISE = 1
STREAM_COST = 2
STREAM_ESTIMATION = 3
STREAM_SEARCH = 4


def keyed_rng(seed: int, stream: int, step: int = 0) -> np.random.Generator:
    """Generator for (seed, stream, step), independent across all three."""
    key = np.array([seed & _MASK64, (seed >> 64) & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, stream & _MASK64, step & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def mix_seed(base: int, k: int) -> int:
    """Derive a child seed from (base, k), stable across runs."""
    ss = np.random.SeedSequence(entropy=(int(base) & _MASK64, int(k) & _MASK64))
    return int(ss.generate_state(1, np.uint64)[0])
