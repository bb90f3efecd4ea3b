"""Seed handling for reproducible simulations.

All random draws in the toolkit go through ``numpy.random.default_rng``
(PCG64), so a fixed seed is bit-reproducible across runs.  Monte-Carlo
trials derive one seed per trial from a base seed with a splitmix64
finalizer, which keeps trials independent and order-free: trial k of a
run is the same stream no matter how many trials run or in what order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed_base: int, index: int) -> int:
    """Mix a base seed and a trial index into one 64-bit seed.

    splitmix64 finalizer applied to ``seed_base XOR index``; avalanches
    even when base and index differ in a single bit.
    """
    z = ((int(seed_base) ^ int(index)) + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def rng_for(seed: int) -> np.random.Generator:
    """Generator for a given 64-bit seed."""
    return np.random.default_rng(int(seed) & _MASK64)
