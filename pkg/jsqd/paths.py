# jsqd/paths.py
"""
Piecewise-linear paths on a uniform time grid.

A PLPath stores node values v[m, j] at t_m = m T / M for coordinates j = 0..J.
Between nodes the path is linear; its derivative on [t_m, t_{m+1}] is the
forward difference. Fluid solutions Q(t), deviations eta(t) and controls
phi(t) all use this representation.

Deviations around a stationary profile live on the scale sqrt(Q*_j), which
leaves the double range after about ten coordinates. Such a path carries a
constant per-coordinate log_scale: the value of coordinate j is
exp(log_scale[j]) v[m, j], and `physical()` multiplies it back (deep
coordinates then underflow to 0).
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from jsqd.error_handling import InvalidPathError, ShapeError


@dataclass(frozen=True)
class PLPath:
    T: float
    values: np.ndarray = field(repr=False)
    log_scale: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 1:
            raise ShapeError(f"path values need shape (M+1, J+1) with M >= 1, got {arr.shape}")
        if not (np.isfinite(self.T) and self.T > 0):
            raise InvalidPathError(f"path horizon must be positive and finite, got: {self.T}")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise InvalidPathError(f"path has a non-finite value at node {bad[0]}, coordinate {bad[1]}")
        arr.setflags(write=False)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "values", arr)
        if self.log_scale is not None:
            scale = np.array(self.log_scale, dtype=float)
            if scale.shape != (arr.shape[1],):
                raise ShapeError(f"log_scale needs one entry per coordinate ({arr.shape[1]}), got shape {scale.shape}")
            if not np.all(np.isfinite(scale)):
                raise InvalidPathError("log_scale must be finite")
            scale.setflags(write=False)
            object.__setattr__(self, "log_scale", scale)

    # -----------------------------------------------------------------
    # Grid
    # -----------------------------------------------------------------

    @property
    def M(self) -> int:
        return self.values.shape[0] - 1

    @property
    def depth(self) -> int:
        return self.values.shape[1] - 1

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.M + 1)

    def same_grid(self, other: "PLPath") -> bool:
        return self.M == other.M and abs(self.T - other.T) <= 1e-12 * max(1.0, self.T)

    def require_compatible(self, other: "PLPath", what: str = "paths") -> None:
        if not self.same_grid(other):
            raise ShapeError(f"{what} do not share a grid: (T={self.T}, M={self.M}) vs (T={other.T}, M={other.M})")
        if self.depth != other.depth:
            raise ShapeError(f"{what} have different depths: {self.depth} vs {other.depth}")

    # -----------------------------------------------------------------
    # Evaluation
    # -----------------------------------------------------------------

    def scale_factors(self) -> np.ndarray:
        """exp(log_scale) per coordinate (ones for an unscaled path; may underflow)."""
        if self.log_scale is None:
            return np.ones(self.depth + 1)
        return np.exp(self.log_scale)

    def physical(self) -> "PLPath":
        """The same path with the scale multiplied in."""
        if self.log_scale is None:
            return self
        return type(self)(self.T, self.values * self.scale_factors())

    def slopes(self) -> np.ndarray:
        """Forward differences of the stored values, shape (M, J+1)."""
        return np.diff(self.values, axis=0) / self.dt

    def at_fractions(self, s: np.ndarray) -> np.ndarray:
        """Stored values at t_m + s_k dt for every subinterval m, shape (M, len(s), J+1)."""
        left = self.values[:-1, None, :]
        right = self.values[1:, None, :]
        s = np.asarray(s, dtype=float)[None, :, None]
        return (1.0 - s) * left + s * right

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation of the physical values at time t in [0, T]."""
        if t < 0.0 or t > self.T * (1 + 1e-12):
            raise InvalidPathError(f"time {t} outside [0, {self.T}]")
        x = min(t / self.dt, float(self.M))
        m = min(int(np.floor(x)), self.M - 1)
        s = x - m
        return ((1.0 - s) * self.values[m] + s * self.values[m + 1]) * self.scale_factors()

    # -----------------------------------------------------------------
    # Arithmetic
    # -----------------------------------------------------------------

    def scale(self, c: float) -> "PLPath":
        return type(self)(self.T, c * self.values, self.log_scale)

    def add(self, other: "PLPath") -> "PLPath":
        self.require_compatible(other)
        if self.log_scale is not None and other.log_scale is not None \
                and np.array_equal(self.log_scale, other.log_scale):
            return type(self)(self.T, self.values + other.values, self.log_scale)
        return type(self)(self.T, self.physical().values + other.physical().values)

    def truncate(self, K: int) -> "PLPath":
        """Zero the coordinates above K."""
        v = self.values.copy()
        v[:, K + 1:] = 0.0
        return type(self)(self.T, v, self.log_scale)

    def with_depth(self, depth: int) -> "PLPath":
        """Pad with zero coordinates or cut to depth J."""
        v = np.zeros((self.M + 1, depth + 1))
        m = min(depth, self.depth) + 1
        v[:, :m] = self.values[:, :m]
        scale = None
        if self.log_scale is not None:
            scale = np.zeros(depth + 1)
            scale[:m] = self.log_scale[:m]
        return type(self)(self.T, v, scale)

    def tail_sums(self) -> "PLPath":
        """eta_i = sum_{j >= i} tilde_eta_j."""
        v = self.physical().values
        return type(self)(self.T, np.cumsum(v[:, ::-1], axis=1)[:, ::-1])

    def differences(self) -> "PLPath":
        """tilde_eta_j = eta_j - eta_{j+1} (entry beyond the depth is 0)."""
        v = self.physical().values
        nxt = np.zeros_like(v)
        nxt[:, :-1] = v[:, 1:]
        return type(self)(self.T, v - nxt)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.physical().values)))

    def sup_distance(self, other: "PLPath") -> float:
        """sup over nodes of the l2 distance over coordinates 1..J."""
        self.require_compatible(other)
        diff = self.physical().values[:, 1:] - other.physical().values[:, 1:]
        return float(np.max(np.linalg.norm(diff, axis=1)))

    # -----------------------------------------------------------------
    # Constructors
    # -----------------------------------------------------------------

    @classmethod
    def constant(cls, vector, T: float, M: int):
        v = np.asarray(getattr(vector, "values", vector), dtype=float)
        return cls(T, np.tile(v, (M + 1, 1)))

    @classmethod
    def zeros(cls, T: float, M: int, depth: int):
        return cls(T, np.zeros((M + 1, depth + 1)))

    @classmethod
    def from_function(cls, f: Callable[[float], np.ndarray], T: float, M: int, depth: int):
        """Sample f(t) (an array of length <= J+1) at the grid nodes."""
        v = np.zeros((M + 1, depth + 1))
        for m, t in enumerate(np.linspace(0.0, T, M + 1)):
            row = np.asarray(f(t), dtype=float)
            v[m, :row.size] = row[:depth + 1]
        return cls(T, v)

    # -----------------------------------------------------------------
    # Serialization
    # -----------------------------------------------------------------

    def to_dict(self) -> dict:
        data = {"T": self.T, "grid_points": self.M + 1, "coords": self.depth + 1,
                "values": self.values.tolist()}
        if self.log_scale is not None:
            data["log_scale"] = self.log_scale.tolist()
        return data

    @classmethod
    def from_dict(cls, data: dict):
        values = np.asarray(data["values"], dtype=float)
        if values.ndim != 2:
            raise ShapeError("path values must be a list of rows")
        if "grid_points" in data and int(data["grid_points"]) != values.shape[0]:
            raise ShapeError(f"grid_points={data['grid_points']} but {values.shape[0]} rows given")
        if "coords" in data and int(data["coords"]) != values.shape[1]:
            raise ShapeError(f"coords={data['coords']} but rows have {values.shape[1]} entries")
        return cls(float(data["T"]), values, data.get("log_scale"))

    def csv_header(self, prefix: str = "Q") -> List[str]:
        return ["t"] + [f"{prefix}{j}" for j in range(1, self.depth + 1)]

    def csv_rows(self) -> List[list]:
        rows = self.physical().values
        return [[t] + row[1:].tolist() for t, row in zip(self.grid.tolist(), rows)]


class Control(PLPath):
    """Reduced control phi_j(t) on a path grid (node values, linear in between)."""


def require_same_grid(*paths: Optional[PLPath]) -> None:
    present = [p for p in paths if p is not None]
    for p in present[1:]:
        present[0].require_compatible(p)
