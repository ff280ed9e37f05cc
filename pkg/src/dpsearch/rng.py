"""Seeded random stream utilities.

Every randomized component in this library derives its randomness from a
64-bit master seed plus an integer path, so that rebuilding any structure
from the same seed reproduces it bit for bit.  Streams for unrelated
purposes (copy construction, per-query noise, instance synthesis) live on
disjoint paths and never interfere, which is what makes lazy/eager twins
and serialization round-trips exactly reproducible.
"""

from __future__ import annotations

import numpy as np

_U64 = (1 << 64) - 1


def _as_u64(x: int) -> int:
    return int(x) & _U64


def generator(seed: int, *path: int) -> np.random.Generator:
    """Deterministic PCG64 generator for ``(seed, *path)``.

    Distinct paths give statistically independent streams; identical
    arguments give identical streams.
    """
    entropy = [_as_u64(seed)] + [_as_u64(p) for p in path]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def counter_generator(seed: int, counter: int) -> np.random.Generator:
    """Counter-based Philox generator keyed on ``(seed, counter)``.

    Used where single items (e.g. one column of a sketching matrix) must be
    regenerable in isolation, bit-identically, without storing the whole
    object.
    """
    return np.random.Generator(np.random.Philox(key=[_as_u64(seed), _as_u64(counter)]))


def open_unit(rng: np.random.Generator, size=None):
    """Uniform variates in the open interval (0, 1).

    ``Generator.random`` draws from [0, 1); the zero (probability 2^-53) is
    remapped to 2^-53 so that downstream logarithms stay finite.
    """
    u = rng.random(size)
    if size is None:
        return u if u > 0.0 else 2.0**-53
    return np.maximum(u, 2.0**-53)
