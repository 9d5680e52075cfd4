"""Seeded random streams with deterministic replay and substream spawning."""

from __future__ import annotations

import numpy as np

Rng = np.random.Generator


def make_rng(seed) -> Rng:
    """Return a Generator; ints seed a fresh PCG64 stream, Generators pass through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def split(rng: Rng, k: int) -> list[Rng]:
    """k independent child streams; deterministic given the parent state."""
    return list(rng.spawn(k))
