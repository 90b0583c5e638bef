# jsqd/simulation/occupancy_ctmc.py
from jsqd.occupancy.vectors import FiniteQVector
from jsqd.simulation.base_simulator import BaseSimulator


class OccupancyCTMCSimulator(BaseSimulator):
    """Gillespie simulation of the tail counts alone.

    An arrival increments Q_i with probability R^n_i(Q) = H(c_{i-1}) - H(c_i),
    where H(m) = binom(m, d) / binom(n, d) is the chance that all d sampled
    servers have length >= the level. A departure decrements Q_i at rate
    c_i - c_{i+1}.
    """

    name = "occupancy"

    def reset_state(self, state: FiniteQVector) -> None:
        self._set_counts(state)
        d, n = self.params.d, self.n
        self._denominators = [float(n - k) for k in range(d)]

    def _all_sampled_at_least(self, m: int) -> float:
        """H(m) as a float; zero for m < d."""
        if m < self.params.d:
            return 0.0
        out = 1.0
        for k, den in enumerate(self._denominators):
            out *= (m - k) / den
        return out

    def _arrival_level(self, u: float) -> int:
        """Length of the joined queue: #{k >= 1 : H(c_k) > u}."""
        counts = self._counts
        length = 0
        while length + 1 < len(counts) and self._all_sampled_at_least(counts[length + 1]) > u:
            length += 1
        return length

    def _arrival(self) -> bool:
        length = self._arrival_level(self.stream.uniform())
        K = self.params.buffer
        if K is not None and length >= K:
            self._notify("drop", length)
            return False
        self._notify("arrival", length)
        self._grow(length)
        return True

    def _departure(self) -> None:
        counts = self._counts
        x = self.stream.uniform() * counts[1]
        # level with c_{L+1} <= x < c_L
        length = 1
        while length + 1 < len(counts) and counts[length + 1] > x:
            length += 1
        self._notify("departure", length)
        self._shrink(length)
