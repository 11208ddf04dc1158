"""Deterministic seeded RNG with independent child streams.

Backed by numpy's Philox counter-based generator. Child streams are keyed
by (seed, stream index), so scene i is reproducible without generating
scenes 0..i-1 first.
"""
from __future__ import annotations

import numpy as np


class SeededRng:
    """Thin wrapper over np.random.Generator(Philox). Single-owner: split
    child streams up front before handing work to parallel workers."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = int(stream) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(
            np.random.Philox(key=np.array([self.seed, self.stream], dtype=np.uint64)))

    def child(self, stream: int) -> "SeededRng":
        """Independent stream; deterministic function of (seed, stream)."""
        return SeededRng(self.seed, stream)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def choice(self, seq):
        return seq[int(self._gen.integers(0, len(seq)))]

    def shuffle(self, arr):
        self._gen.shuffle(arr)
        return arr

    @property
    def numpy(self) -> np.random.Generator:
        return self._gen
