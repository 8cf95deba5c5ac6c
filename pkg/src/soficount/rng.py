"""Seeded random streams.

Every random draw in the package comes from a PCG64 bit generator keyed by
``(seed, *stream_key)`` through :class:`numpy.random.SeedSequence`. Streams
never depend on worker count or scheduling order, so a rerun with the same
seed reproduces every sample bit for bit.

Permutations are drawn with :meth:`numpy.random.Generator.permutation`,
which is a Fisher-Yates shuffle driven by the stream.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

MASK64 = (1 << 64) - 1


def _key(part: int) -> int:
    part = int(part)
    if part < 0:
        # SeedSequence spawn keys must be non-negative.
        return (1 << 64) + (part & MASK64)
    return part


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``(seed, *key)``."""
    seq = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(_key(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def streams(seed: int, keys: Iterable[tuple[int, ...]]) -> list[np.random.Generator]:
    return [stream(seed, *k) for k in keys]
