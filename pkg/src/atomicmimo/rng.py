"""Seeded, splittable random number generation.

Built on numpy's Philox bit generator, which is counter-based: the same seed
and call sequence reproduce bit-identical streams on any platform, and child
streams obtained via :meth:`RngState.split` are statistically independent of
the parent and of each other.  Monte Carlo trials are parallelised by giving
each trial its own child stream, so results do not depend on execution order.
"""
from __future__ import annotations

import numpy as np


class RngState:
    """A reproducible random stream with a 64-bit root seed.

    Instances are cheap; ``split`` derives independent children without
    consuming draws from the parent stream.  ``draws`` counts sampling calls
    made on this stream (the stream position).
    """

    def __init__(self, seed: int, _seq: np.random.SeedSequence | None = None):
        if _seq is None:
            if not (0 <= int(seed) < 2 ** 64):
                raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
            _seq = np.random.SeedSequence(int(seed))
        self.seed = int(seed)
        self._seq = _seq
        self._gen = np.random.Generator(np.random.Philox(_seq))
        self.draws = 0

    def split(self, n: int) -> list["RngState"]:
        """Derive ``n`` independent child streams (parent stream untouched)."""
        if n < 1:
            raise ValueError("split count must be >= 1")
        return [RngState(self.seed, _seq=child) for child in self._seq.spawn(n)]

    def child(self) -> "RngState":
        return self.split(1)[0]

    # -- sampling -----------------------------------------------------------

    def normal(self, shape=(), scale: float = 1.0, dtype=np.float64) -> np.ndarray:
        self.draws += 1
        out = self._gen.standard_normal(size=shape, dtype=np.float64) * scale
        return out.astype(dtype, copy=False)

    def uniform(self, low: float = 0.0, high: float = 1.0, shape=()) -> np.ndarray:
        self.draws += 1
        return self._gen.uniform(low, high, size=shape)

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        """Uniform integers in [low, high)."""
        self.draws += 1
        return self._gen.integers(low, high, size=shape)

    def __repr__(self):
        return f"RngState(seed={self.seed}, draws={self.draws})"
