# jsqd/occupancy/bounds.py
"""
Checkable forms of the drift inequalities.

Every check returns True when the inequality holds with an additive float
slack; the constants are exposed separately so tests can report margins.
Norms are Euclidean over the stored coordinates 0..J.
"""
import numpy as np

from jsqd.occupancy.combinatorics import finite_correction_constant, routing_rates_float, sample_ratio
from jsqd.occupancy.drift import drift_finite, drift_limit, linearized_drift, taylor_remainder
from jsqd.occupancy.vectors import FiniteQVector, ModelParams, QVector

SLACK = 1e-12


def lipschitz_constant_limit(params: ModelParams) -> float:
    return 2.0 * params.lam * params.d + 2.0


def lipschitz_constant_finite(params: ModelParams, n: int) -> float:
    return 2.0 * params.lam * params.d * finite_correction_constant(n, params.d) + 2.0


def check_lipschitz_limit(q: QVector, qbar: QVector, params: ModelParams, slack: float = SLACK) -> bool:
    """||b(q) - b(qbar)|| <= (2 lambda d + 2) ||q - qbar||."""
    lhs = np.linalg.norm(drift_limit(q, params) - drift_limit(qbar, params))
    rhs = lipschitz_constant_limit(params) * np.linalg.norm(q.values - qbar.values)
    return bool(lhs <= rhs + slack)


def check_lipschitz_finite(q: FiniteQVector, qbar: FiniteQVector, params: ModelParams,
                           slack: float = SLACK) -> bool:
    """||b^n(q) - b^n(qbar)|| <= (2 lambda d C_n + 2) ||q - qbar||."""
    lhs = np.linalg.norm(drift_finite(q, params) - drift_finite(qbar, params))
    rhs = lipschitz_constant_finite(params, q.n) * np.linalg.norm((q.counts - qbar.counts) / q.n)
    return bool(lhs <= rhs + slack)


def check_finite_limit_gap(q: FiniteQVector, params: ModelParams, slack: float = SLACK) -> bool:
    """||b^n(q) - b(q)|| <= (4 lambda d^2 / n) ||q||."""
    qv = q.scaled()
    lhs = np.linalg.norm(drift_finite(q, params) - drift_limit(qv, params))
    rhs = 4.0 * params.lam * params.d ** 2 / q.n * np.linalg.norm(qv.values)
    return bool(lhs <= rhs + slack)


def check_finite_limit_gap_coordinatewise(q: FiniteQVector, params: ModelParams,
                                          slack: float = SLACK) -> bool:
    """|b^n_i(q) - b_i(q)| <= 2 lambda d^2 (q_{i-1} + q_i) / n for every i >= 1."""
    qv = q.scaled().values
    gap = np.abs(drift_finite(q, params) - drift_limit(qv, params))[1:]
    bound = 2.0 * params.lam * params.d ** 2 * (qv[:-1] + qv[1:]) / q.n
    return bool(np.all(gap <= bound + slack))


def unit_rate_total_finite(q: FiniteQVector, params: ModelParams) -> float:
    """sum_i [lambda R^n_i(q) + (q_i - q_{i+1})]."""
    qv = q.counts / q.n
    rates = params.lam * routing_rates_float(q, params)
    # arrivals beyond the truncation depth still count
    overflow = params.lam * float(sample_ratio(q.counts[-1], q.n, params.d))
    return float(rates[1:].sum() + overflow + qv[1])


def check_unit_rate_finite(q: FiniteQVector, params: ModelParams, slack: float = SLACK) -> bool:
    """sum_i [lambda R^n_i + (q_i - q_{i+1})] <= lambda (d^2 + d) / 2 + 1."""
    bound = params.lam * (params.d ** 2 + params.d) / 2.0 + 1.0
    return unit_rate_total_finite(q, params) <= bound + slack


def check_unit_rate_limit(q: QVector, params: ModelParams, slack: float = SLACK) -> bool:
    """sum_i [lambda (q_{i-1}^d - q_i^d) + (q_i - q_{i+1})] <= lambda + 1."""
    qv = q.values
    qd = qv ** params.d
    departures = qv[1:] - np.append(qv[2:], 0.0)
    total = float(np.sum(params.lam * (qd[:-1] - qd[1:]) + departures))
    return bool(total <= params.lam + 1.0 + slack)


def check_linearization_norm(q: QVector, p, params: ModelParams, slack: float = SLACK) -> bool:
    """||Db(q)[p]|| <= (2 lambda d + 2) ||p||."""
    p = np.asarray(p, dtype=float)
    lhs = np.linalg.norm(linearized_drift(q, p, params))
    return bool(lhs <= lipschitz_constant_limit(params) * np.linalg.norm(p) + slack)


def check_remainder_bound(qbar: QVector, q: QVector, params: ModelParams, slack: float = SLACK) -> bool:
    """||theta_b(qbar, q)|| <= lambda d (d - 1) ||qbar - q||^2."""
    lhs = np.linalg.norm(taylor_remainder(qbar, q, params))
    rhs = params.lam * params.d * (params.d - 1) * np.linalg.norm(qbar.values - q.values) ** 2
    return bool(lhs <= rhs + slack)
