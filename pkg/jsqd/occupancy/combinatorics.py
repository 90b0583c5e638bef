# jsqd/occupancy/combinatorics.py
"""
Exact routing probabilities for d servers sampled without replacement.

binom(m, d) / binom(n, d) is the probability that all d sampled servers come
from a fixed group of m servers; it vanishes for m < d.
"""
from fractions import Fraction
from math import comb

import numpy as np

from jsqd.error_handling import DomainError
from jsqd.occupancy.vectors import FiniteQVector, ModelParams


def binom_ratio(m: int, n: int, d: int) -> Fraction:
    """Exact binom(m, d) / binom(n, d)."""
    if d < 1:
        raise DomainError(f"d must be >= 1, got: {d}")
    if n < d:
        raise DomainError(f"need n >= d, got n={n}, d={d}")
    if m < 0 or m > n:
        raise DomainError(f"need 0 <= m <= n, got m={m}, n={n}")
    return Fraction(comb(m, d), comb(n, d))


def sample_ratio(m, n: int, d: int) -> np.ndarray:
    """Floating binom(m, d) / binom(n, d) = prod_k (m-k)/(n-k), vectorized over m.

    The product has a zero factor whenever m < d, so no special casing is needed.
    """
    m = np.asarray(m, dtype=float)
    out = np.ones_like(m)
    for k in range(d):
        out = out * (m - k) / (n - k)
    return np.where(m >= d, out, 0.0)


def routing_rate_finite(q: FiniteQVector, i: int, params: ModelParams) -> Fraction:
    """Probability that an arrival joins a queue of length exactly i-1 (increments Q_i)."""
    if i < 1:
        raise DomainError(f"routing level must be >= 1 (Q_0 is fixed at 1), got: {i}")
    d = params.d
    return binom_ratio(q.count(i - 1), q.n, d) - binom_ratio(q.count(i), q.n, d)


def routing_rates_finite(q: FiniteQVector, params: ModelParams) -> list:
    """[R^n_1, ..., R^n_{J+1}] as exact rationals; they sum to one."""
    return [routing_rate_finite(q, i, params) for i in range(1, q.depth + 2)]


def routing_rates_float(q: FiniteQVector, params: ModelParams) -> np.ndarray:
    """Floating R^n_i for i = 1..J (index 0 of the result is unused and 0)."""
    h = sample_ratio(np.append(q.counts, 0), q.n, params.d)
    out = np.zeros(q.depth + 1)
    out[1:] = h[:-2] - h[1:-1]
    return out


def finite_correction_constant(n: int, d: int) -> float:
    """C_n = prod_{k=1}^{d-1} n / (n - k)."""
    if n <= d - 1:
        raise DomainError(f"need n >= d, got n={n}, d={d}")
    out = 1.0
    for k in range(1, d):
        out *= n / (n - k)
    return out


def monotone_ratio(x: float, y: float, k: int, d: int) -> float:
    """f(x, y) = (x^k - y^k) / (x^d - y^d), decreasing in x and in y for 1 <= k < d."""
    if not (1 <= k < d):
        raise DomainError(f"need 1 <= k < d, got k={k}, d={d}")
    if x == y:
        raise DomainError("monotone_ratio is not evaluated at x == y")
    if not (0.0 <= y < x <= 1.0):
        raise DomainError(f"need 0 <= y < x <= 1, got x={x}, y={y}")
    return (x ** k - y ** k) / (x ** d - y ** d)
