"""
Monte Carlo harness: law of large numbers and moderate-deviation trend experiments.
"""

from .experiments import MdpConfig, MdpReport, an_schedule, run_lln_experiment, run_mdp_experiment
from .statistics import wilson_coverage, wilson_interval

__all__ = [
    'MdpConfig',
    'MdpReport',
    'an_schedule',
    'run_lln_experiment',
    'run_mdp_experiment',
    'wilson_coverage',
    'wilson_interval',
]
