"""Seed derivation and small formatting helpers.

Every random stream in the package is derived from a single master seed
via a fixed 64-bit mixing function so that trials are reproducible and
independent of execution order.  The constants below are part of the
on-disk reproducibility contract and must not change between versions.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix64(seed: int, *parts: int | str) -> int:
    """Mix a seed with a sequence of tags into a new 64-bit seed.

    String tags are folded in byte-wise; integer tags directly.  The
    mixing is splitmix64, applied once per ingested word.
    """
    h = _splitmix64(seed & _MASK64)
    for part in parts:
        if isinstance(part, str):
            data = part.encode("utf-8")
            for i in range(0, len(data), 8):
                word = int.from_bytes(data[i : i + 8], "little")
                h = _splitmix64(h ^ word)
        else:
            h = _splitmix64(h ^ (int(part) & _MASK64))
    return h


def rng_from(seed: int, *parts: int | str) -> np.random.Generator:
    """A fresh PCG64 generator for the stream named by ``parts``."""
    return np.random.default_rng(mix64(seed, *parts))


def fmt(value: float | int) -> str:
    """Shortest round-trip decimal form, used for every numeric output."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))
