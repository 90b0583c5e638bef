# jsqd/simulation/rng.py
"""
Per-replica random streams.

Replica r of a run with seed s draws from Philox keyed by SeedSequence(s, spawn_key=(r,)),
so the numbers a replica sees depend only on (s, r), never on scheduling.
"""
import numpy as np

BLOCK_SIZE = 4096


def replica_generator(seed: int, replica: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(replica,))))


class RandomStream:
    """Block-buffered uniforms and unit exponentials from a replica generator."""

    def __init__(self, seed: int, replica: int = 0, block_size: int = BLOCK_SIZE):
        self.seed = seed
        self.replica = replica
        self._gen = replica_generator(seed, replica)
        self._block = block_size
        self._u = self._gen.random(block_size).tolist()
        self._e = self._gen.standard_exponential(block_size).tolist()
        self._ui = 0
        self._ei = 0

    def uniform(self) -> float:
        """U[0, 1)."""
        if self._ui == self._block:
            self._u = self._gen.random(self._block).tolist()
            self._ui = 0
        u = self._u[self._ui]
        self._ui += 1
        return u

    def exponential(self) -> float:
        """Unit-rate exponential."""
        if self._ei == self._block:
            self._e = self._gen.standard_exponential(self._block).tolist()
            self._ei = 0
        e = self._e[self._ei]
        self._ei += 1
        return e

    def index(self, n: int) -> int:
        """Uniform integer in 0..n-1."""
        k = int(self.uniform() * n)
        return k if k < n else n - 1
