# jsqd/harness/statistics.py
from typing import Tuple

import numpy as np
from scipy import stats

from jsqd.error_handling import DomainError


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got: {trials}")
    if not 0 <= successes <= trials:
        raise DomainError(f"successes must lie in [0, {trials}], got: {successes}")
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got: {level}")
    z = stats.norm.ppf(0.5 + level / 2.0)
    p = successes / trials
    z2n = z * z / trials
    center = (p + z2n / 2.0) / (1.0 + z2n)
    half = z / (1.0 + z2n) * np.sqrt(p * (1.0 - p) / trials + z2n / (4.0 * trials))
    return float(max(0.0, center - half)), float(min(1.0, center + half))


def wilson_coverage(p: float, trials: int, reps: int = 1000, seed: int = 0, level: float = 0.95) -> float:
    """Fraction of `reps` synthetic Binomial(trials, p) samples whose Wilson interval covers p."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got: {p}")
    rng = np.random.default_rng(seed)
    covered = 0
    for k in rng.binomial(trials, p, size=reps):
        lo, hi = wilson_interval(int(k), trials, level)
        covered += lo <= p <= hi
    return covered / reps
