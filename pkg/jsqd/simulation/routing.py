# jsqd/simulation/routing.py
"""
Brute-force routing oracle and exact generator rates.

`arrival_routing_distribution` enumerates every d-subset of servers, so it is
only offered for small systems; `jump_rates` gives the occupancy-chain
transition rates in exact rational arithmetic.
"""
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import List, Optional, Sequence

from jsqd.error_handling import DomainError
from jsqd.occupancy.combinatorics import routing_rate_finite
from jsqd.occupancy.vectors import FiniteQVector, ModelParams

MAX_ENUMERATED_SERVERS = 25


@dataclass(frozen=True)
class RoutingDistribution:
    """levels[i] = P(arrival increments Q_i) for i >= 1 (levels[0] is 0); drop = P(discarded)."""
    levels: List[Fraction]
    drop: Fraction

    def total(self) -> Fraction:
        return sum(self.levels, Fraction(0)) + self.drop

    def level(self, i: int) -> Fraction:
        return self.levels[i] if i < len(self.levels) else Fraction(0)


def arrival_routing_distribution(lengths: Sequence[int], d: int,
                                 buffer: Optional[int] = None) -> RoutingDistribution:
    n = len(lengths)
    if n > MAX_ENUMERATED_SERVERS:
        raise DomainError(f"refusing to enumerate subsets of n={n} > {MAX_ENUMERATED_SERVERS} servers")
    if d < 1 or d > n:
        raise DomainError(f"need 1 <= d <= n, got d={d}, n={n}")
    if any(x < 0 for x in lengths):
        raise DomainError("queue lengths must be non-negative")

    hits = [0] * (max(lengths) + 2)
    dropped = 0
    for subset in combinations(range(n), d):
        shortest = min(lengths[s] for s in subset)
        if buffer is not None and shortest >= buffer:
            dropped += 1
        else:
            hits[shortest + 1] += 1
    total = comb(n, d)
    return RoutingDistribution(levels=[Fraction(h, total) for h in hits],
                               drop=Fraction(dropped, total))


@dataclass(frozen=True)
class JumpRates:
    """Exact transition rates of the occupancy chain at one state.

    up[i-1]:   Q_i -> Q_i + 1/n at rate n lambda R^n_i  (zero above the buffer)
    down[i-1]: Q_i -> Q_i - 1/n at rate n (q_i - q_{i+1})
    """
    up: List[Fraction]
    down: List[Fraction]


def jump_rates(state: FiniteQVector, params: ModelParams) -> JumpRates:
    lam = Fraction(params.lam)
    K = params.buffer
    up, down = [], []
    for i in range(1, state.depth + 2):
        if K is not None and i > K:
            up.append(Fraction(0))
        else:
            up.append(state.n * lam * routing_rate_finite(state, i, params))
        down.append(Fraction(state.count(i) - state.count(i + 1)))
    return JumpRates(up=up, down=down)


def is_global_jsq_step(lengths: Sequence[int], buffer: Optional[int] = None) -> bool:
    """With d = n every arrival must join a globally shortest queue (or be dropped at the buffer)."""
    n = len(lengths)
    dist = arrival_routing_distribution(lengths, n, buffer)
    shortest = min(lengths)
    if buffer is not None and shortest >= buffer:
        return dist.drop == 1
    return dist.level(shortest + 1) == 1
