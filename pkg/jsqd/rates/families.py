# jsqd/rates/families.py
"""
Test trajectories built on the stationary profile, on [0, 2].

With amplitude a_j = c_j sqrt(Q*_j):

    A: (1 - 1/j) a_j t on [0, 1], then (1 - 1/j) a_j (2 - t) on [1, 2]
    B: a_j t on [0, 1/j], a_j (2/j - t) on [1/j, 2/j], 0 afterwards
    C: a_j t on [0, 1/j], a_j (2/j - t) on [1/j, 2]

The down-ramps are written so that every coordinate is continuous.

The paths are returned on the scale sqrt(Q*_j): values hold c_j times the
ramp and log_scale[j] = E_j log(lambda) / 2 with E_j = (d^j - 1)/(d - 1),
so coordinates past the double range of Q*_j stay in the rate.
"""
from typing import Callable, Optional, Sequence, Union

import math

import numpy as np

from jsqd.config import cfg
from jsqd.error_handling import DomainError
from jsqd.fluid.stationary import stationary_exponent
from jsqd.occupancy.vectors import ModelParams
from jsqd.paths import PLPath

FAMILY_HORIZON = 2.0
FAMILIES = ("A", "B", "C")

Coefficients = Union[Callable[[int], float], Sequence[float], None]


def harmonic(j: int) -> float:
    return 1.0 / j


def _coefficients(coefficients: Coefficients, depth: int) -> np.ndarray:
    """c_1..c_J as an array indexed 0..J (entry 0 unused)."""
    c = np.zeros(depth + 1)
    if coefficients is None:
        coefficients = harmonic
    if callable(coefficients):
        c[1:] = [coefficients(j) for j in range(1, depth + 1)]
    else:
        given = np.asarray(coefficients, dtype=float)
        m = min(given.size, depth)
        c[1:m + 1] = given[:m]
    if not np.all(np.isfinite(c)):
        raise DomainError("family coefficients must be finite")
    return c


def family_trajectory(kind: str, coefficients: Coefficients = None, T: float = FAMILY_HORIZON,
                      params: Optional[ModelParams] = None, depth: Optional[int] = None,
                      M: Optional[int] = None) -> PLPath:
    kind = kind.upper()
    if kind not in FAMILIES:
        raise DomainError(f"Unknown family: {kind}. Available: {', '.join(FAMILIES)}")
    if abs(T - FAMILY_HORIZON) > 1e-12:
        raise DomainError(f"family trajectories live on [0, 2], got T={T}")
    params = params or ModelParams()
    depth = params.depth if depth is None else depth
    M = cfg.get("grid_points") if M is None else M
    if not 0.0 < params.lam < 1.0:
        raise DomainError(f"families need lambda in (0, 1), got: {params.lam}")
    log_scale = np.array([0.5 * stationary_exponent(k, params.d) * math.log(params.lam) for k in range(depth + 1)])
    log_scale[0] = 0.0
    amplitude = _coefficients(coefficients, depth)
    j = np.arange(depth + 1, dtype=float)
    j[0] = 1.0

    t = np.linspace(0.0, T, M + 1)[:, None]
    if kind == "A":
        a = amplitude * (1.0 - 1.0 / j)
        values = np.where(t <= 1.0, a * t, a * (2.0 - t))
    else:
        peak = 1.0 / j
        up = amplitude * t
        down = amplitude * (2.0 * peak - t)
        values = np.where(t <= peak, up, down)
        if kind == "B":
            values = np.where(t <= 2.0 * peak, values, 0.0)
    values[:, 0] = 0.0
    return PLPath(T, values, log_scale)
