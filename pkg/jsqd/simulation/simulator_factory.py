# jsqd/simulation/simulator_factory.py
import os
from dataclasses import replace
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Any, Callable, List, Optional

from jsqd.simulation.base_simulator import SimConfig, Trajectory


class SimulatorFactory:
    """
    Factory class to create simulation engines by name.
    """

    @staticmethod
    def create(name: str, config: SimConfig, log_callback: Optional[Callable] = None, observer=None):
        """
        Create a simulator for one run.

        Args:
            name: Engine type ("server", "occupancy")
            config: Run configuration
            log_callback: Optional sink for log lines
            observer: Optional callable receiving a SimEvent before every state change

        Returns:
            A BaseSimulator ready to run().
        """
        from jsqd.simulation.occupancy_ctmc import OccupancyCTMCSimulator
        from jsqd.simulation.server_level import ServerLevelSimulator

        ENGINES = {
            "server": lambda: ServerLevelSimulator(config, log_callback=log_callback, observer=observer),
            "occupancy": lambda: OccupancyCTMCSimulator(config, log_callback=log_callback, observer=observer),
        }

        base = name.lower()
        if base in ("server-level", "servers"):
            base = "server"
        elif base in ("ctmc", "gillespie"):
            base = "occupancy"

        if base in ENGINES:
            return ENGINES[base]()

        raise ValueError(f"Unknown simulator type: {name}")


def simulate_server_level(config: SimConfig, log_callback: Optional[Callable] = None) -> Trajectory:
    return SimulatorFactory.create("server", config, log_callback).run()


def simulate_occupancy_ctmc(config: SimConfig, log_callback: Optional[Callable] = None) -> Trajectory:
    return SimulatorFactory.create("occupancy", config, log_callback).run()


def occupancy_time_average(config: SimConfig, engine: str = "occupancy") -> List[float]:
    """Long-run fraction of time (averaged over servers) with queue length >= i, i = 0..J."""
    run_config = replace(config, track_time_average=True)
    return SimulatorFactory.create(engine, run_config).run().time_average.tolist()


def resolve_threads(threads: int) -> int:
    """0 means one worker per CPU."""
    return threads if threads and threads > 0 else (os.cpu_count() or 1)


def run_replicas(engine: str, config: SimConfig, replicas: int,
                 summarize: Optional[Callable[[Trajectory], Any]] = None,
                 threads: int = 0, log_callback: Optional[Callable] = None) -> list:
    """Run replicas 0..replicas-1 and return their summaries in replica order.

    Replica r draws from its own stream (seed, r), so the result is the same
    for every thread count.
    """
    summarize = summarize or (lambda traj: traj)

    def _log(msg):
        if log_callback:
            log_callback(msg)

    def _one(r: int):
        traj = SimulatorFactory.create(engine, config.for_replica(r)).run()
        return r, summarize(traj)

    results: list = [None] * replicas
    workers = min(resolve_threads(threads), max(replicas, 1))
    if workers == 1:
        for r in range(replicas):
            results[r] = _one(r)[1]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(_one, r) for r in range(replicas)]
            for future in as_completed(futures):
                r, value = future.result()
                results[r] = value
    _log(f"[Simulator] {replicas} {engine} replicas done (n={config.n}, workers={workers})")
    return results
