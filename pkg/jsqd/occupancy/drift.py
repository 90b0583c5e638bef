# jsqd/occupancy/drift.py
"""
Drifts of the occupancy process.

    finite n:  b^n_i(q) = lambda R^n_i(q) - (q_i - q_{i+1})
    limit:     b_i(q)   = lambda (q_{i-1}^d - q_i^d) - (q_i - q_{i+1})
    linearized Db(q)[p]_i = lambda d q_{i-1}^{d-1} p_{i-1} - (lambda d q_i^{d-1} + 1) p_i + p_{i+1}

Vectors are indexed 0..J with coordinate 0 frozen (its drift is 0) and
q_{J+1} := 0. In buffered mode coordinates i > K are zero and the q_{K+1}
term is dropped at i = K.

The array helpers (`limit_drift_array`, `linearized_drift_array`) work on the
last axis, so a whole time grid of states can be evaluated at once.
"""
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from jsqd.error_handling import DomainError, ShapeError
from jsqd.occupancy.combinatorics import routing_rate_finite, routing_rates_float
from jsqd.occupancy.vectors import FiniteQVector, ModelParams, QVector

ArrayLike = Union[QVector, np.ndarray, list, tuple]


def _values(q: ArrayLike) -> np.ndarray:
    if isinstance(q, QVector):
        return q.values
    if isinstance(q, FiniteQVector):
        return q.counts / q.n
    return np.asarray(q, dtype=float)


def _shift_up(x: np.ndarray) -> np.ndarray:
    """x_{i+1} along the last axis with x_{J+1} = 0."""
    out = np.zeros_like(x)
    out[..., :-1] = x[..., 1:]
    return out


def _shift_down(x: np.ndarray) -> np.ndarray:
    """x_{i-1} along the last axis (entry 0 is unused and set to 0)."""
    out = np.zeros_like(x)
    out[..., 1:] = x[..., :-1]
    return out


def _apply_buffer(b: np.ndarray, p: np.ndarray, buffer: Optional[int]) -> None:
    """Zero coordinates above K and remove the +p_{K+1} term at K (in place)."""
    if buffer is None or buffer + 1 >= b.shape[-1]:
        return
    b[..., buffer] -= p[..., buffer + 1]
    b[..., buffer + 1:] = 0.0


def limit_drift_array(q: np.ndarray, lam: float, d: int, buffer: Optional[int] = None) -> np.ndarray:
    qd = q ** d
    b = lam * (_shift_down(qd) - qd) - (q - _shift_up(q))
    b[..., 0] = 0.0
    _apply_buffer(b, q, buffer)
    return b


def linearized_drift_array(q: np.ndarray, p: np.ndarray, lam: float, d: int,
                           buffer: Optional[int] = None) -> np.ndarray:
    coef = lam * d * q ** (d - 1)
    out = _shift_down(coef * p) - (coef + 1.0) * p + _shift_up(p)
    out[..., 0] = 0.0
    _apply_buffer(out, p, buffer)
    return out


def drift_limit(q: ArrayLike, params: ModelParams) -> np.ndarray:
    """Fluid drift b(q); entry 0 is 0."""
    return limit_drift_array(_values(q), params.lam, params.d, params.buffer)


def drift_finite(q: FiniteQVector, params: ModelParams, exact: bool = False):
    """Finite-n drift b^n(q).

    With exact=True the routing rates are kept rational and lambda is converted
    with Fraction, giving a list of Fractions; otherwise a float array.
    """
    if params.d > q.n:
        raise DomainError(f"d={params.d} exceeds the number of servers n={q.n}")
    K = params.buffer
    J = q.depth
    if exact:
        lam = Fraction(params.lam)
        out = [Fraction(0)] * (J + 1)
        for i in range(1, J + 1):
            if K is not None and i > K:
                continue
            nxt = 0 if (K is not None and i == K) else q.count(i + 1)
            out[i] = lam * routing_rate_finite(q, i, params) - Fraction(q.count(i) - nxt, q.n)
        return out
    qv = q.counts / q.n
    b = params.lam * routing_rates_float(q, params) - (qv - _shift_up(qv))
    b[0] = 0.0
    _apply_buffer(b, qv, K)
    return b


def linearized_drift(q: ArrayLike, p, params: ModelParams) -> np.ndarray:
    """Frechet derivative Db(q)[p]; requires p_0 = 0."""
    qv = _values(q)
    pv = np.asarray(p, dtype=float)
    if pv.shape != qv.shape:
        raise ShapeError(f"p has shape {pv.shape}, expected {qv.shape}")
    if pv[..., 0].any():
        raise DomainError("direction p must have p_0 = 0 (coordinate 0 is frozen)")
    return linearized_drift_array(qv, pv, params.lam, params.d, params.buffer)


def taylor_remainder(qbar: ArrayLike, q: ArrayLike, params: ModelParams) -> np.ndarray:
    """theta_b(qbar, q) = b(qbar) - b(q) - Db(q)[qbar - q]."""
    qb, qv = _values(qbar), _values(q)
    if qb.shape != qv.shape:
        raise ShapeError(f"states have shapes {qb.shape} and {qv.shape}")
    delta = qb - qv
    delta[..., 0] = 0.0
    return (limit_drift_array(qb, params.lam, params.d, params.buffer)
            - limit_drift_array(qv, params.lam, params.d, params.buffer)
            - linearized_drift_array(qv, delta, params.lam, params.d, params.buffer))


def taylor_remainder_quadratic(qbar: ArrayLike, q: ArrayLike, params: ModelParams) -> np.ndarray:
    """Closed form of the remainder for d = 2: lambda (Delta_{i-1}^2 - Delta_i^2)."""
    if params.d != 2:
        raise DomainError(f"closed-form remainder needs d = 2, got: {params.d}")
    delta = _values(qbar) - _values(q)
    sq = delta ** 2
    out = params.lam * (_shift_down(sq) - sq)
    out[..., 0] = 0.0
    if params.buffer is not None:
        out[..., params.buffer + 1:] = 0.0
    return out
