"""
Mean-field fluid limit: RK4 integration and stationary profiles.
"""

from .integrator import FluidOpts, integrate_fluid, lln_bound, observed_order, truncation_residual
from .stationary import (
    BufferedSolution,
    StationaryReport,
    buffer_gap_report,
    solve_buffered,
    stationary_profile,
    stationary_profile_buffered,
)

__all__ = [
    'FluidOpts',
    'integrate_fluid',
    'lln_bound',
    'observed_order',
    'truncation_residual',
    'BufferedSolution',
    'StationaryReport',
    'buffer_gap_report',
    'solve_buffered',
    'stationary_profile',
    'stationary_profile_buffered',
]
