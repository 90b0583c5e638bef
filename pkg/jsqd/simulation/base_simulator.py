# jsqd/simulation/base_simulator.py
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Union

import numpy as np

from jsqd.error_handling import ConfigError, InvalidStateError
from jsqd.occupancy.vectors import FiniteQVector, ModelParams, QVector
from jsqd.simulation.rng import RandomStream

ALL_EVENTS = "all-events"


@dataclass(frozen=True)
class SimConfig:
    """One simulation run of the n-server system over [0, horizon]."""
    n: int
    params: ModelParams
    horizon: float
    init: Optional[FiniteQVector] = None
    seed: int = 0
    record: Union[float, str] = 0.01
    replica: int = 0
    track_time_average: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got: {self.n}", flag="--n")
        if self.params.d > self.n:
            raise ConfigError(f"d={self.params.d} exceeds the number of servers n={self.n}", flag="--d")
        if not (self.horizon > 0 and np.isfinite(self.horizon)):
            raise ConfigError(f"horizon must be positive, got: {self.horizon}", flag="--t-max")
        if self.record != ALL_EVENTS:
            try:
                step = float(self.record)
            except (TypeError, ValueError):
                raise ConfigError(f"record must be a positive spacing or '{ALL_EVENTS}', got: {self.record}",
                                  flag="--record")
            if not step > 0:
                raise ConfigError(f"record spacing must be positive, got: {step}", flag="--record")
        if self.init is not None:
            if self.init.n != self.n:
                raise ConfigError(f"initial state has n={self.init.n}, expected {self.n}")
            K = self.params.buffer
            if K is not None and any(self.init.count(i) for i in range(K + 1, self.init.depth + 1)):
                raise InvalidStateError(f"initial state has queues longer than the buffer K={K}")

    def initial_state(self) -> FiniteQVector:
        if self.init is None:
            return FiniteQVector.empty(self.n, self.params.depth)
        return self.init

    def for_replica(self, replica: int) -> "SimConfig":
        return replace(self, replica=replica)

    def record_grid(self) -> Optional[np.ndarray]:
        """Recording times k*step <= horizon (plus the horizon itself if off-grid)."""
        if self.record == ALL_EVENTS:
            return None
        step = float(self.record)
        m = int(np.floor(self.horizon / step + 1e-9))
        grid = np.arange(m + 1) * step
        if grid[-1] < self.horizon - 1e-12:
            grid = np.append(grid, self.horizon)
        return grid


@dataclass
class Trajectory:
    """Recorded scaled tail occupancy (one row per record time) plus event counts."""
    times: np.ndarray
    states: np.ndarray
    n: int
    arrivals: int = 0
    departures: int = 0
    drops: int = 0
    time_average: Optional[np.ndarray] = None
    seed: int = 0
    replica: int = 0

    @property
    def depth(self) -> int:
        return self.states.shape[1] - 1

    def qvector(self, k: int) -> QVector:
        return QVector(self.states[k])

    def terminal(self) -> np.ndarray:
        return self.states[-1]

    def event_counts(self) -> dict:
        return {"arrivals": self.arrivals, "departures": self.departures, "drops": self.drops}

    def sup_distance(self, reference: np.ndarray) -> float:
        """sup over record times of the truncated l2 distance to reference rows."""
        reference = np.asarray(reference, dtype=float)
        if reference.shape != self.states.shape:
            raise InvalidStateError(f"reference has shape {reference.shape}, trajectory {self.states.shape}")
        return float(np.max(np.linalg.norm(self.states[:, 1:] - reference[:, 1:], axis=1)))

    def csv_header(self) -> List[str]:
        return ["t"] + [f"Q{i}" for i in range(1, self.depth + 1)]

    def csv_rows(self) -> List[list]:
        return [[t] + row[1:].tolist() for t, row in zip(self.times.tolist(), self.states)]

    def summary_dict(self) -> dict:
        out = {"n": self.n, "seed": self.seed, "replica": self.replica,
               "horizon": float(self.times[-1]), "records": int(self.times.size)}
        out.update(self.event_counts())
        if self.time_average is not None:
            out["time_average"] = self.time_average.tolist()
        return out

    def to_dict(self) -> dict:
        out = self.summary_dict()
        out["times"] = self.times.tolist()
        out["states"] = self.states.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        avg = data.get("time_average")
        return cls(times=np.asarray(data["times"], dtype=float),
                   states=np.asarray(data["states"], dtype=float),
                   n=int(data["n"]), arrivals=int(data.get("arrivals", 0)),
                   departures=int(data.get("departures", 0)), drops=int(data.get("drops", 0)),
                   time_average=None if avg is None else np.asarray(avg, dtype=float),
                   seed=int(data.get("seed", 0)), replica=int(data.get("replica", 0)))


@dataclass(frozen=True)
class SimEvent:
    """Event passed to observers before the state changes; `level` is the queue length touched."""
    time: float
    kind: str
    level: int
    server: Optional[int] = None


class _Recorder:
    def __init__(self, grid: Optional[np.ndarray], depth: int, n: int):
        self.grid = grid
        self.depth = depth
        self.n = n
        self.times: list = []
        self.rows: list = []
        self._k = 0

    def _row(self, counts: list) -> np.ndarray:
        row = np.zeros(self.depth + 1)
        m = min(len(counts), self.depth + 1)
        row[:m] = counts[:m]
        return row / self.n

    def advance(self, t: float, counts: list) -> None:
        """Record every grid time before t with the current (pre-event) state."""
        grid = self.grid
        if grid is None:
            return
        if self._k < grid.size and grid[self._k] < t:
            row = self._row(counts)
            while self._k < grid.size and grid[self._k] < t:
                self.times.append(grid[self._k])
                self.rows.append(row)
                self._k += 1

    def push(self, t: float, counts: list) -> None:
        self.times.append(t)
        self.rows.append(self._row(counts))

    def close(self, horizon: float, counts: list) -> tuple:
        if self.grid is None:
            self.push(horizon, counts)
        else:
            self.advance(np.inf, counts)
        return np.asarray(self.times, dtype=float), np.vstack(self.rows)


class BaseSimulator(ABC):
    """Event loop shared by the JSQ(d) engines.

    Both engines see the same exponential clock of total rate n*lambda + (busy
    servers); subclasses decide which queue an arrival joins and which server
    completes. Tail counts c_i = #{queues with length >= i} are kept here.
    """

    name = "base"

    def __init__(self, config: SimConfig, log_callback: Optional[Callable] = None,
                 observer: Optional[Callable[[SimEvent], None]] = None):
        self.config = config
        self.params = config.params
        self.n = config.n
        self.log_callback = log_callback
        self.observer = observer
        self.stream: Optional[RandomStream] = None
        self._counts: list = []
        self._now = 0.0

    def _log(self, message: str):
        if self.log_callback:
            self.log_callback(message)
        else:
            print(message)

    def _notify(self, kind: str, level: int, server: Optional[int] = None):
        if self.observer is not None:
            self.observer(SimEvent(self._now, kind, level, server))

    # -----------------------------------------------------------------
    # Tail-count bookkeeping
    # -----------------------------------------------------------------

    def _set_counts(self, state: FiniteQVector):
        counts = [int(c) for c in state.counts]
        while len(counts) > 1 and counts[-1] == 0:
            counts.pop()
        self._counts = counts

    def _grow(self, length: int):
        """A queue of the given length gained a job: c_{length+1} += 1."""
        counts = self._counts
        if length + 1 == len(counts):
            counts.append(0)
        counts[length + 1] += 1

    def _shrink(self, length: int):
        """A queue of the given length lost a job: c_length -= 1."""
        counts = self._counts
        counts[length] -= 1
        if counts[-1] == 0 and len(counts) > 1:
            counts.pop()

    def tail_counts(self) -> FiniteQVector:
        """Current state as a FiniteQVector at the configured depth."""
        depth = max(self.params.depth, len(self._counts) - 1)
        counts = np.zeros(depth + 1, dtype=np.int64)
        counts[:len(self._counts)] = self._counts
        return FiniteQVector(counts, self.n)

    # -----------------------------------------------------------------
    # Engine hooks
    # -----------------------------------------------------------------

    @abstractmethod
    def reset_state(self, state: FiniteQVector) -> None:
        """Load the initial state (and any engine-specific structures)."""
        raise NotImplementedError("Subclasses must implement reset_state()")

    @abstractmethod
    def _arrival(self) -> bool:
        """Route one arrival; return False when it is dropped at a full buffer."""
        raise NotImplementedError("Subclasses must implement _arrival()")

    @abstractmethod
    def _departure(self) -> None:
        """Complete one job at a uniformly chosen busy server."""
        raise NotImplementedError("Subclasses must implement _departure()")

    # -----------------------------------------------------------------
    # Template method
    # -----------------------------------------------------------------

    def run(self) -> Trajectory:
        """Simulate over [0, horizon] and return the recorded trajectory."""
        cfg = self.config
        self.stream = RandomStream(cfg.seed, cfg.replica)
        self.reset_state(cfg.initial_state())
        horizon = cfg.horizon
        arrival_rate = self.n * self.params.lam
        recorder = _Recorder(cfg.record_grid(), self.params.depth, self.n)
        if cfg.record == ALL_EVENTS:
            recorder.push(0.0, self._counts)

        track = cfg.track_time_average
        area = [0.0] * (self.params.depth + 1)
        arrivals = departures = drops = 0
        stream = self.stream
        t = 0.0

        while True:
            counts = self._counts
            busy = counts[1] if len(counts) > 1 else 0
            total = arrival_rate + busy
            if total <= 0.0:
                break
            t_next = t + stream.exponential() / total
            if track:
                self._accumulate(area, min(t_next, horizon) - t)
            if t_next > horizon:
                break
            t = t_next
            self._now = t
            recorder.advance(t, counts)
            if stream.uniform() * total < arrival_rate:
                if self._arrival():
                    arrivals += 1
                else:
                    drops += 1
            else:
                self._departure()
                departures += 1
            if cfg.record == ALL_EVENTS:
                recorder.push(t, self._counts)

        if track and total <= 0.0:
            self._accumulate(area, horizon - t)
        times, states = recorder.close(horizon, self._counts)
        return Trajectory(times=times, states=states, n=self.n, arrivals=arrivals,
                          departures=departures, drops=drops,
                          time_average=(np.asarray(area) / (self.n * horizon)) if track else None,
                          seed=cfg.seed, replica=cfg.replica)

    def _accumulate(self, area: list, dt: float):
        counts = self._counts
        for i in range(min(len(counts), len(area))):
            area[i] += counts[i] * dt
