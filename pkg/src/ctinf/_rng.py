from __future__ import annotations

import numpy as np

from .errors import ValidationError

# Samples are drawn in fixed-size chunks, each with its own spawned stream, so
# results do not depend on how chunks are distributed over workers.
CHUNK = 256


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        # fresh copy: spawning mutates the spawn counter
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(0, 2**63)))
    if seed is None:
        raise ValidationError("a seed is required")
    return np.random.SeedSequence(int(seed))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(as_seed_sequence(rng))


def chunk_streams(seed, n: int, chunk: int = CHUNK):
    """Yield ``(start, stop, generator)`` covering ``range(n)`` in fixed chunks."""
    ss = as_seed_sequence(seed)
    nchunks = -(-n // chunk)
    for c, child in enumerate(ss.spawn(nchunks)):
        start = c * chunk
        yield start, min(n, start + chunk), np.random.default_rng(child)
