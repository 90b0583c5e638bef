"""
Moderate-deviation rate function: evaluation, controlled ODE and the K-convergence study.
"""

from .rate_function import (
    RateBreakdown,
    ProfileCoefficients,
    check_depth,
    control_cost,
    phi_from_path,
    profile_coefficients,
    quadratic_cost,
    rate_at_profile,
    rate_denominators,
    rate_I,
    rate_I_mu,
    solve_controlled_ode,
    split_control_cost,
)
from .buffered import rate_buffered, rate_stationary, rate_truncated, tail_criterion
from .families import FAMILIES, family_trajectory
from .convergence import convergence_study, is_monotone_decreasing, tracks

__all__ = [
    'RateBreakdown',
    'ProfileCoefficients',
    'check_depth',
    'control_cost',
    'phi_from_path',
    'profile_coefficients',
    'quadratic_cost',
    'rate_at_profile',
    'rate_denominators',
    'rate_I',
    'rate_I_mu',
    'solve_controlled_ode',
    'split_control_cost',
    'rate_buffered',
    'rate_truncated',
    'rate_stationary',
    'tail_criterion',
    'FAMILIES',
    'family_trajectory',
    'convergence_study',
    'is_monotone_decreasing',
    'tracks',
]
