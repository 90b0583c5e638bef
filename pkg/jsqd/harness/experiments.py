# jsqd/harness/experiments.py
"""
Monte Carlo experiments comparing the n-server system with its fluid limit.

Every replica r runs on its own stream (seed, r) and is reduced to a few
deviation numbers; rows are assembled in replica order so reports do not
depend on the thread count.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import stats

from jsqd.config import cfg
from jsqd.error_handling import ConfigError
from jsqd.fluid.integrator import FluidOpts, integrate_fluid
from jsqd.fluid.stationary import stationary_profile
from jsqd.harness.statistics import wilson_interval
from jsqd.occupancy.vectors import FiniteQVector, ModelParams, QVector
from jsqd.reports import ExperimentReport
from jsqd.simulation.base_simulator import SimConfig, Trajectory
from jsqd.simulation.simulator_factory import run_replicas

EVENTS = ("sup", "terminal")
INITS = ("empty", "stationary")
MIN_REPLICAS = 100
QUANTILES = (0.5, 0.9)

MDP_COLUMNS = ["n", "a_n", "scale", "replicas", "hits", "p", "p_low", "p_high", "a2_log_p", "rare",
               "q50_sqrt_n", "q90_sqrt_n", "q50_scaled", "q90_scaled"]
LLN_COLUMNS = ["n", "replicas", "median_sup_distance", "q90_sup_distance", "sqrt_n_median"]


def an_schedule(n: float, gamma: float) -> float:
    """a(n) = n^-gamma with 0 < gamma < 1/2."""
    if not 0.0 < gamma < 0.5:
        raise ConfigError(f"gamma must lie in (0, 0.5), got: {gamma}", flag="--gamma")
    if not n > 0:
        raise ConfigError(f"n must be positive, got: {n}", flag="--n-list")
    return float(n) ** (-gamma)


@dataclass(frozen=True)
class MdpConfig:
    n_list: Sequence[int] = (500, 2000, 8000)
    gamma: float = 0.3
    replicas: int = MIN_REPLICAS
    coordinate: int = 1
    delta: float = 1.0
    event: str = "sup"
    params: ModelParams = field(default_factory=ModelParams)
    horizon: float = 10.0
    seed: int = 0
    threads: int = 0
    engine: str = "occupancy"
    record_step: float = 0.01
    init: str = "empty"

    def __post_init__(self):
        n_list = [int(n) for n in self.n_list]
        if not n_list or any(n < 1 for n in n_list):
            raise ConfigError(f"n_list must hold positive server counts, got: {list(self.n_list)}", flag="--n-list")
        if any(b <= a for a, b in zip(n_list, n_list[1:])):
            raise ConfigError(f"n_list must be strictly increasing, got: {n_list}", flag="--n-list")
        object.__setattr__(self, "n_list", tuple(n_list))
        an_schedule(n_list[0], self.gamma)
        if self.replicas < MIN_REPLICAS:
            raise ConfigError(f"replicas must be >= {MIN_REPLICAS}, got: {self.replicas}", flag="--replicas")
        if not 1 <= self.coordinate <= self.params.depth:
            raise ConfigError(f"coordinate must lie in 1..{self.params.depth}, got: {self.coordinate}",
                              flag="--coordinate")
        if not (self.delta >= 0 and math.isfinite(self.delta)):
            raise ConfigError(f"delta must be a finite number >= 0, got: {self.delta}", flag="--delta")
        if self.event not in EVENTS:
            raise ConfigError(f"event must be one of {', '.join(EVENTS)}, got: {self.event}", flag="--event")
        if self.init not in INITS:
            raise ConfigError(f"init must be one of {', '.join(INITS)}, got: {self.init}", flag="--init")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ConfigError(f"horizon must be positive, got: {self.horizon}", flag="--t-max")
        if not self.record_step > 0:
            raise ConfigError(f"record_step must be positive, got: {self.record_step}", flag="--record")

    @classmethod
    def from_config(cls, params: ModelParams, **overrides) -> "MdpConfig":
        values = dict(n_list=tuple(cfg.get("n_list")), gamma=cfg.get("gamma"), replicas=cfg.get("replicas"),
                      coordinate=cfg.get("coordinate"), delta=cfg.get("delta"), params=params,
                      horizon=cfg.get("t_max"), seed=cfg.get("seed"), threads=cfg.get("threads"),
                      record_step=cfg.get("record_step"))
        values.update(overrides)
        return cls(**values)

    def to_dict(self) -> dict:
        return {"n_list": list(self.n_list), "gamma": self.gamma, "replicas": self.replicas,
                "coordinate": self.coordinate, "delta": self.delta, "event": self.event,
                "params": self.params.to_dict(), "horizon": self.horizon, "seed": self.seed,
                "engine": self.engine, "record_step": self.record_step, "init": self.init}


@dataclass
class MdpReport(ExperimentReport):
    """One row per n, ordered by n."""

    def __post_init__(self):
        self.rows.sort(key=lambda r: r["n"])

    def probabilities(self) -> np.ndarray:
        return self.column("p")

    def intervals_disjoint(self) -> bool:
        """Consecutive 95% Wilson intervals do not overlap (p decreasing in n)."""
        lo, hi = self.column("p_low"), self.column("p_high")
        return bool(np.all(hi[1:] < lo[:-1]))

    @classmethod
    def from_dict(cls, data: dict) -> "MdpReport":
        base = ExperimentReport.from_dict(data)
        return cls(name=base.name, columns=base.columns, rows=base.rows, meta=base.meta)


def _initial_q(config: MdpConfig) -> QVector:
    depth = config.params.depth
    if config.init == "stationary":
        return QVector(stationary_profile(config.params, depth).values)
    values = np.zeros(depth + 1)
    values[0] = 1.0
    return QVector(values)


def _fluid_reference(config: MdpConfig, q0: QVector, log_callback: Optional[Callable]) -> np.ndarray:
    opts = FluidOpts.from_config(config.params, record_step=config.record_step)
    return integrate_fluid(q0, config.params, opts, config.horizon, log_callback=log_callback).values


def _deviations(config: MdpConfig, n: int, q0: QVector, reference: np.ndarray,
                log_callback: Optional[Callable]) -> np.ndarray:
    """Rows (sup_t |dQ_j|, |dQ_j(T)|, sup_t truncated-l2 distance), one per replica."""
    j = config.coordinate
    sim = SimConfig(n=n, params=config.params, horizon=config.horizon,
                    init=FiniteQVector.round_from(q0, n, config.params.depth),
                    seed=config.seed, record=config.record_step)

    def summarize(traj: Trajectory):
        diff = traj.states[:, j] - reference[:, j]
        return (float(np.max(np.abs(diff))), float(abs(diff[-1])), traj.sup_distance(reference))

    return np.array(run_replicas(config.engine, sim, config.replicas, summarize,
                                 threads=config.threads, log_callback=log_callback))


def run_lln_experiment(config: MdpConfig, log_callback: Optional[Callable] = None) -> MdpReport:
    """Median sup-distance to the fluid path per n and its log-log slope in n."""
    log = log_callback or (lambda msg: None)
    q0 = _initial_q(config)
    reference = _fluid_reference(config, q0, log_callback)
    report = MdpReport(name="lln", columns=list(LLN_COLUMNS))
    for n in config.n_list:
        distances = _deviations(config, n, q0, reference, log_callback)[:, 2]
        median = float(np.median(distances))
        report.add_row(n=n, replicas=config.replicas, median_sup_distance=median,
                       q90_sup_distance=float(np.quantile(distances, 0.9)),
                       sqrt_n_median=math.sqrt(n) * median)
        log(f"[Harness] LLN n={n}: median sup distance {median:.4e}")

    medians = report.column("median_sup_distance")
    slope = float("nan")
    if len(config.n_list) >= 2 and np.all(medians > 0):
        slope = float(stats.linregress(np.log(config.n_list), np.log(medians)).slope)
    report.meta = {"config": config.to_dict(), "slope": slope,
                   "decreasing": bool(np.all(np.diff(medians) < 0))}
    return report


def run_mdp_experiment(config: MdpConfig, log_callback: Optional[Callable] = None) -> MdpReport:
    """p_n = P(a(n) sqrt(n) |Q^n_j - Q_j| >= delta) over the configured event, per n."""
    log = log_callback or (lambda msg: None)
    q0 = _initial_q(config)
    reference = _fluid_reference(config, q0, log_callback)
    column = 0 if config.event == "sup" else 1
    report = MdpReport(name="mdp", columns=list(MDP_COLUMNS))
    for n in config.n_list:
        a_n = an_schedule(n, config.gamma)
        scale = a_n * math.sqrt(n)
        deviation = _deviations(config, n, q0, reference, log_callback)[:, column]
        hits = int(np.count_nonzero(scale * deviation >= config.delta))
        low, high = wilson_interval(hits, config.replicas)
        sqrt_q = np.quantile(math.sqrt(n) * deviation, QUANTILES)
        row = dict(n=n, a_n=a_n, scale=scale, replicas=config.replicas, hits=hits,
                   p_high=high, rare=hits == 0,
                   q50_sqrt_n=float(sqrt_q[0]), q90_sqrt_n=float(sqrt_q[1]),
                   q50_scaled=float(a_n * sqrt_q[0]), q90_scaled=float(a_n * sqrt_q[1]))
        if hits:
            p = hits / config.replicas
            row.update(p=p, p_low=low, a2_log_p=a_n * a_n * math.log(p))
            log(f"[Harness] MDP n={n}: p={p:.4g} [{low:.4g}, {high:.4g}]")
        else:
            row.update(p=None, p_low=None, a2_log_p=None)
            log(f"[Harness] MDP n={n}: no hits in {config.replicas} replicas (rare), p <= {high:.4g}")
        report.add_row(**row)

    p = report.probabilities()
    report.meta = {"config": config.to_dict(),
                   "p_decreasing": bool(np.all(np.diff(p) < 0)),
                   "intervals_disjoint": report.intervals_disjoint()}
    return report
