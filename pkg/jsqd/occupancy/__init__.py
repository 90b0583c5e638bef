"""
Occupancy state types, finite-n routing combinatorics and the JSQ(d) drifts.
"""

from .vectors import (
    FiniteQVector,
    ModelParams,
    MuVector,
    QVector,
    lambda0,
    mu_to_q,
    q_to_mu,
)
from .combinatorics import (
    binom_ratio,
    monotone_ratio,
    routing_rate_finite,
    routing_rates_finite,
)
from .drift import (
    drift_finite,
    drift_limit,
    linearized_drift,
    taylor_remainder,
)

__all__ = [
    'FiniteQVector',
    'ModelParams',
    'MuVector',
    'QVector',
    'lambda0',
    'mu_to_q',
    'q_to_mu',
    'binom_ratio',
    'monotone_ratio',
    'routing_rate_finite',
    'routing_rates_finite',
    'drift_finite',
    'drift_limit',
    'linearized_drift',
    'taylor_remainder',
]
