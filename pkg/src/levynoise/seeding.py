"""Counter-based seed derivation.

Every random stream in the package is keyed by ``(seed, *keys)`` through
:class:`numpy.random.SeedSequence`, so adding replicates or components never
perturbs existing streams.
"""
from __future__ import annotations

import numpy as np

# component tags for skeleton simulation
LARGE_JUMPS = 1
SMALL_JUMPS = 2
BROWNIAN = 3
BATCH = 4

CHUNK = 8192


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the stream addressed by ``(seed, *keys)``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


def replicate_seed(seed: int, index: int) -> int:
    """Per-replicate seed: a 63-bit integer derived from ``(seed, index)``."""
    state = np.random.SeedSequence([int(seed), int(index)]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def chunk_rngs(seed: int, n: int, *keys: int):
    """Yield ``(start, stop, rng)`` over fixed-size chunks covering ``n`` replicates.

    Chunk ``c`` always draws from the stream ``(seed, *keys, c)``, and callers
    draw full ``CHUNK``-sized blocks before truncating, so replicate ``j`` has
    the same value whatever ``n`` is.
    """
    for c, start in enumerate(range(0, n, CHUNK)):
        yield start, min(start + CHUNK, n), derive_rng(seed, *keys, BATCH, c)
