"""
Stochastic simulation of the n-server JSQ(d) system.

Two engines with the same occupancy law: an explicit server-level model and
a Gillespie simulation of the tail counts.
"""

from .base_simulator import ALL_EVENTS, BaseSimulator, SimConfig, SimEvent, Trajectory
from .occupancy_ctmc import OccupancyCTMCSimulator
from .server_level import ServerLevelSimulator
from .routing import RoutingDistribution, JumpRates, arrival_routing_distribution, is_global_jsq_step, jump_rates
from .simulator_factory import (
    SimulatorFactory,
    occupancy_time_average,
    run_replicas,
    simulate_occupancy_ctmc,
    simulate_server_level,
)

# Registry of available engines
AVAILABLE_SIMULATORS = {
    'server': ServerLevelSimulator,
    'occupancy': OccupancyCTMCSimulator,
}


def get_simulator(name: str, config: SimConfig, **kwargs):
    """
    Get a simulator instance by name

    Raises:
        ValueError: If the engine name is not recognized
    """
    if name not in AVAILABLE_SIMULATORS:
        available = ', '.join(AVAILABLE_SIMULATORS.keys())
        raise ValueError(f"Unknown simulator '{name}'. Available: {available}")
    return AVAILABLE_SIMULATORS[name](config, **kwargs)


__all__ = [
    'ALL_EVENTS',
    'BaseSimulator',
    'SimConfig',
    'SimEvent',
    'Trajectory',
    'OccupancyCTMCSimulator',
    'ServerLevelSimulator',
    'RoutingDistribution',
    'JumpRates',
    'arrival_routing_distribution',
    'is_global_jsq_step',
    'jump_rates',
    'SimulatorFactory',
    'occupancy_time_average',
    'run_replicas',
    'simulate_occupancy_ctmc',
    'simulate_server_level',
    'AVAILABLE_SIMULATORS',
    'get_simulator',
]
