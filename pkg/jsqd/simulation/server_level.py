# jsqd/simulation/server_level.py
from typing import List

import numpy as np

from jsqd.occupancy.vectors import FiniteQVector
from jsqd.simulation.base_simulator import BaseSimulator


class ServerLevelSimulator(BaseSimulator):
    """Explicit n-server JSQ(d): sample d distinct servers, join a shortest one.

    Ties among the sampled minimizers are broken uniformly. Busy servers are
    kept in an array with swap-remove so a uniform completion costs O(1).
    """

    name = "server"

    def reset_state(self, state: FiniteQVector) -> None:
        self._set_counts(state)
        # Longest queues on the lowest server indices
        self._lengths: List[int] = [int(x) for x in state.to_lengths()]
        self._busy: List[int] = [s for s, x in enumerate(self._lengths) if x > 0]
        self._pos = [-1] * self.n
        for k, s in enumerate(self._busy):
            self._pos[s] = k

    @property
    def lengths(self) -> np.ndarray:
        return np.array(self._lengths, dtype=np.int64)

    def _sample_servers(self) -> List[int]:
        """d distinct servers, uniformly (Floyd's algorithm)."""
        n, d = self.n, self.params.d
        chosen: List[int] = []
        seen = set()
        for j in range(n - d, n):
            t = self.stream.index(j + 1)
            pick = j if t in seen else t
            chosen.append(pick)
            seen.add(pick)
        return chosen

    def _arrival(self) -> bool:
        lengths = self._lengths
        best = -1
        ties = 0
        target = -1
        for s in self._sample_servers():
            x = lengths[s]
            if best < 0 or x < best:
                best, target, ties = x, s, 1
            elif x == best:
                # reservoir choice keeps the tie-break uniform
                ties += 1
                if self.stream.index(ties) == 0:
                    target = s
        K = self.params.buffer
        if K is not None and best >= K:
            self._notify("drop", best, target)
            return False
        self._notify("arrival", best, target)
        if best == 0:
            self._pos[target] = len(self._busy)
            self._busy.append(target)
        lengths[target] = best + 1
        self._grow(best)
        return True

    def _departure(self) -> None:
        busy = self._busy
        k = self.stream.index(len(busy))
        s = busy[k]
        length = self._lengths[s]
        self._notify("departure", length, s)
        self._lengths[s] = length - 1
        if length == 1:
            last = busy.pop()
            if last != s:
                busy[k] = last
                self._pos[last] = k
            self._pos[s] = -1
        self._shrink(length)
