# jsqd/rates/buffered.py
"""
Rates around stationary profiles, with and without a buffer.

    stationary: I^{Q*}(q)        the full path under the unbuffered profile
    buffered:   I^{Q*(K)}(q^K)  the path truncated at K under the buffered profile
    truncated:  I^{Q*}(q^K)     the same truncated path under the unbuffered profile

At a stationary profile the denominators collapse to 2 (Q*_j - Q*_{j+1})
(2 Q*_K(K) at the buffer), and under Q* the truncated path still pays for
coordinate K+1 through the coupling term d lambda Q*_K^(d-1) q_K.

All three go through `rate_at_profile` with the profile held in mpmath, so
paths built on the sqrt(Q*_j) scale keep their deep coordinates.
"""
from typing import Callable, Optional

import mpmath
import numpy as np

from jsqd.error_handling import DomainError
from jsqd.fluid.stationary import WORKING_DPS, solve_buffered, stationary_profile_mp
from jsqd.occupancy.vectors import ModelParams
from jsqd.paths import PLPath
from jsqd.rates.rate_function import NODE_FRACTIONS, NODE_WEIGHTS, RateBreakdown, rate_at_profile

MODES = ("buffered", "truncated")


def _require_subcritical(params: ModelParams):
    if not params.lam < 1.0:
        raise DomainError(f"lambda must be < 1 for stationary-profile rates, got: {params.lam}")


def rate_stationary(q: PLPath, params: ModelParams, log_callback: Optional[Callable] = None,
                    **kwargs) -> RateBreakdown:
    """I^{Q*}(q) at the depth of q, with the truncation diagnostic at coordinate J."""
    _require_subcritical(params)
    base = ModelParams(lam=params.lam, d=params.d, buffer=None, depth=q.depth)
    with mpmath.workdps(WORKING_DPS):
        profile = stationary_profile_mp(params.lam, params.d, q.depth)
    return rate_at_profile(q, profile, base, log_callback=log_callback, **kwargs)


def rate_buffered(q: PLPath, K: int, params: ModelParams, mode: str = "buffered",
                  log_callback: Optional[Callable] = None, **kwargs) -> RateBreakdown:
    """Rate of q truncated at K, under Q*(K) ("buffered") or Q* ("truncated")."""
    _require_subcritical(params)
    if mode not in MODES:
        raise DomainError(f"unknown buffered-rate mode '{mode}'. Available: {', '.join(MODES)}")
    if K < 1 or K + 2 > q.depth:
        raise DomainError(f"buffer K={K} needs path depth >= K + 2, got depth {q.depth}")
    qK = q.truncate(K)
    if mode == "truncated":
        return rate_stationary(qK, params, log_callback=log_callback, **kwargs)
    buffered = ModelParams(lam=params.lam, d=params.d, buffer=K, depth=q.depth)
    profile = solve_buffered(buffered, K).profile_mp
    return rate_at_profile(qK, profile, buffered, log_callback=log_callback, **kwargs)


def rate_truncated(q: PLPath, K: int, params: ModelParams, **kwargs) -> RateBreakdown:
    return rate_buffered(q, K, params, mode="truncated", **kwargs)


def tail_criterion(q: PLPath, K: int, params: ModelParams) -> float:
    """int_0^T |q'_K + q_K - q_{K+1}|^2 / (2 Q*_K) dt.

    The factor s_K^2 / (2 Q*_K) is formed in mpmath on the scale of q. Where
    it leaves the double range the integrand follows the rate convention:
    0 when the numerator vanishes there, +inf otherwise.
    """
    _require_subcritical(params)
    if K < 1 or K > q.depth - 1:
        raise DomainError(f"K must lie in 1..{q.depth - 1}, got: {K}")
    log_scale = q.log_scale if q.log_scale is not None else np.zeros(q.depth + 1)
    with mpmath.workdps(WORKING_DPS):
        qstar_K = stationary_profile_mp(params.lam, params.d, K)[K]
        s_K = mpmath.exp(mpmath.mpf(float(log_scale[K])))
        s_next = mpmath.exp(mpmath.mpf(float(log_scale[K + 1])))
        factor = float(s_K ** 2 / (2 * qstar_K)) if qstar_K > 0 else float("inf")
        ratio = float(s_next / s_K)
    nodes = q.at_fractions(NODE_FRACTIONS)
    slope = q.slopes()[:, None, K]
    numerator = (slope + nodes[..., K] - ratio * nodes[..., K + 1]) ** 2
    if not np.any(numerator):
        return 0.0
    if not np.isfinite(factor):
        return float("inf")
    return float(factor * q.dt * np.sum(numerator @ NODE_WEIGHTS))
