# jsqd/fluid/integrator.py
"""
RK4 integration of the truncated fluid ODE Q' = b(Q).

The step is fixed; one extra run at h/2 gives an a-posteriori error
estimate. Coordinate J closes with q_{J+1} := 0, and in buffered mode the
coordinates above K stay at 0.
"""
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from jsqd.config import cfg
from jsqd.error_handling import DomainError, ErrorHandler, InvalidStateError, RefineStepError, TruncationError
from jsqd.occupancy.drift import limit_drift_array
from jsqd.occupancy.vectors import ModelParams, QVector
from jsqd.paths import PLPath

RESIDUAL_TOL = 1e-13


@dataclass(frozen=True)
class FluidOpts:
    step: float = 1e-3
    depth: int = 24
    tolerance: float = 1e-8
    buffered: Optional[int] = None
    record_step: Optional[float] = 0.01
    estimate_error: bool = True
    check_residual: bool = True

    def __post_init__(self):
        if not self.step > 0:
            raise DomainError(f"step must be positive, got: {self.step}")
        if not self.tolerance > 0:
            raise DomainError(f"tolerance must be positive, got: {self.tolerance}")
        if self.record_step is not None and not self.record_step > 0:
            raise DomainError(f"record_step must be positive, got: {self.record_step}")

    @classmethod
    def from_config(cls, params: ModelParams, **overrides) -> "FluidOpts":
        values = dict(step=cfg.get("fluid_step"), depth=params.depth,
                      tolerance=cfg.get("fluid_tolerance"), buffered=params.buffer,
                      record_step=cfg.get("record_step"))
        values.update(overrides)
        return cls(**values)


def _log(log_callback: Optional[Callable], message: str):
    if log_callback:
        log_callback(message)


def _grid(horizon: float, opts: FluidOpts):
    """(records, steps per record, effective step)."""
    record = opts.record_step if opts.record_step is not None else opts.step
    records = int(round(horizon / record))
    if records < 1 or abs(records * record - horizon) > 1e-9 * max(1.0, horizon):
        raise DomainError(f"horizon {horizon} is not a multiple of the record spacing {record}")
    per_record = max(1, int(math.ceil(record / opts.step - 1e-9)))
    return records, per_record, record / per_record


def _rk4(q: np.ndarray, h: float, records: int, per_record: int,
         rhs: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    out = np.empty((records + 1, q.size))
    out[0] = q
    for r in range(records):
        for _ in range(per_record):
            k1 = rhs(q)
            k2 = rhs(q + 0.5 * h * k1)
            k3 = rhs(q + 0.5 * h * k2)
            k4 = rhs(q + h * k3)
            q = q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[r + 1] = q
    return out


def truncation_residual(q: np.ndarray, params: ModelParams) -> float:
    """lambda (q_{J-1}^d - q_J^d) + q_J, the flux ignored by closing at depth J."""
    d = params.d
    return float(params.lam * (q[-2] ** d - q[-1] ** d) + q[-1])


def integrate_fluid(q0, params: ModelParams, opts: Optional[FluidOpts] = None,
                    horizon: float = None, log_callback: Optional[Callable] = None) -> PLPath:
    """Solve Q(t) = Q(0) + int_0^t b(Q(s)) ds on [0, horizon].

    Raises RefineStepError when the step-halving estimate exceeds opts.tolerance
    and TruncationError when the depth-J residual check fails.
    """
    opts = opts or FluidOpts.from_config(params)
    horizon = cfg.get("t_max") if horizon is None else horizon
    if not (horizon > 0 and np.isfinite(horizon)):
        raise DomainError(f"horizon must be positive, got: {horizon}")
    buffer = opts.buffered if opts.buffered is not None else params.buffer
    q = QVector(q0.values if isinstance(q0, QVector) else np.asarray(q0, dtype=float)).padded(opts.depth)
    if buffer is not None:
        if opts.depth < buffer + 2:
            raise DomainError(f"depth must be >= buffer + 2 ({buffer + 2}), got: {opts.depth}")
        if np.any(q[buffer + 1:] != 0.0):
            raise InvalidStateError(f"initial state has mass above the buffer K={buffer}")

    lam, d = params.lam, params.d

    def rhs(x):
        return limit_drift_array(x, lam, d, buffer)

    records, per_record, h = _grid(horizon, opts)
    values = _rk4(q, h, records, per_record, rhs)
    _log(log_callback, f"[Fluid] RK4 h={h:g} over [0, {horizon:g}] ({records * per_record} steps)")

    if opts.estimate_error:
        fine = _rk4(q, h / 2.0, records, 2 * per_record, rhs)
        error = float(np.max(np.abs(fine - values))) * 16.0 / 15.0
        _log(log_callback, f"[Fluid] step-halving error estimate {error:.3e}")
        if error > opts.tolerance:
            suggested = 0.9 * h * (opts.tolerance / error) ** 0.25
            raise RefineStepError(
                f"step-halving error {error:.3e} exceeds tolerance {opts.tolerance:.3e}; try step {suggested:.3e}",
                suggested_step=suggested)

    if opts.check_residual and buffer is None:
        residual = truncation_residual(values[-1], params)
        if residual >= RESIDUAL_TOL:
            raise TruncationError(
                f"depth {opts.depth} too shallow: truncation residual {residual:.3e} >= {RESIDUAL_TOL:g}")

    sag = float(np.max(np.diff(values, axis=1)))
    if sag > 1e-10:
        ErrorHandler.log_warning(log_callback or print, "Monotonicity check",
                                 ValueError(f"q_i < q_(i+1) by {sag:.3e}"))
    return PLPath(horizon, values)


def lln_bound(q0, params: ModelParams, t) -> np.ndarray:
    """Gronwall bound 2 ||Q(0)||^2 exp(8 (lambda d + 1)^2 t) on ||Q(t)||^2."""
    q = np.asarray(getattr(q0, "values", q0), dtype=float)
    return 2.0 * float(np.dot(q, q)) * np.exp(8.0 * (params.lam * params.d + 1.0) ** 2 * np.asarray(t))


def observed_order(q0, params: ModelParams, horizon: float,
                   steps: Sequence[float] = (0.02, 0.01, 0.005), depth: Optional[int] = None) -> float:
    """Slope of log sup|Q_h - Q_{h/2}| against log h, i.e. the empirical convergence order."""
    depth = depth or params.depth
    diffs = []
    for h in steps:
        coarse = integrate_fluid(q0, params, FluidOpts(step=h, depth=depth, record_step=max(steps),
                                                       estimate_error=False, check_residual=False), horizon)
        fine = integrate_fluid(q0, params, FluidOpts(step=h / 2.0, depth=depth, record_step=max(steps),
                                                     estimate_error=False, check_residual=False), horizon)
        diffs.append(float(np.max(np.abs(coarse.values - fine.values))))
    fit = stats.linregress(np.log(steps), np.log(diffs))
    return float(fit.slope)
