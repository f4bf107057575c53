"""Deterministic RNG stream derivation.

Every randomized routine takes an explicit integer seed and derives
independent child streams from (seed, index...) paths, so results are
reproducible bit-for-bit regardless of evaluation order.
"""

from __future__ import annotations

import numpy as np


def rng_for(*path: int) -> np.random.Generator:
    """Generator for the stream addressed by an integer path."""
    return np.random.default_rng(np.random.SeedSequence(list(path)))


def derive_seed(*path: int) -> int:
    """Collapse a path to a single u64 seed, for APIs that take one seed."""
    return int(np.random.SeedSequence(list(path)).generate_state(1, np.uint64)[0])
