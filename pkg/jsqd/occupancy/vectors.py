# jsqd/occupancy/vectors.py
"""
State representations for the JSQ(d) occupancy process.

QVector        tail occupancy q_i = fraction of queues with length >= i (q_0 = 1)
FiniteQVector  integer counts n*q_i for an n-server system
MuVector       occupancy measure mu_i = q_i - q_{i+1}
ModelParams    lambda, d, optional buffer K and truncation depth J

All vectors are truncated at depth J; entries beyond J are treated as 0.
"""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from jsqd.error_handling import DomainError, InvalidMeasureError, InvalidStateError

MEASURE_TOL = 1e-12


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModelParams:
    """Model parameters; `lam` is the per-server arrival rate lambda."""
    lam: float = 0.5
    d: int = 2
    buffer: Optional[int] = None
    depth: int = 24

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise DomainError(f"lambda must be a finite non-negative number, got: {self.lam}")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"d must be an integer >= 1, got: {self.d}")
        if self.depth < 1:
            raise DomainError(f"depth must be >= 1, got: {self.depth}")
        if self.buffer is not None:
            if int(self.buffer) != self.buffer or self.buffer < 1:
                raise DomainError(f"buffer must be an integer >= 1, got: {self.buffer}")
            if self.depth < self.buffer + 2:
                raise DomainError(
                    f"depth must be >= buffer + 2 ({self.buffer + 2}) when buffered, got: {self.depth}")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "d", int(self.d))

    @property
    def buffered(self) -> bool:
        return self.buffer is not None

    def with_buffer(self, buffer: Optional[int]) -> "ModelParams":
        depth = self.depth if buffer is None else max(self.depth, buffer + 2)
        return ModelParams(lam=self.lam, d=self.d, buffer=buffer, depth=depth)

    def unbuffered(self) -> "ModelParams":
        return ModelParams(lam=self.lam, d=self.d, buffer=None, depth=self.depth)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "d": self.d, "buffer": self.buffer, "depth": self.depth}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        return cls(lam=data.get("lambda", 0.5), d=data.get("d", 2),
                   buffer=data.get("buffer"), depth=data.get("depth", 24))


def lambda0(params: ModelParams) -> float:
    """lambda_0 := max(lambda, 1), the constant appearing in the moment bounds."""
    return max(params.lam, 1.0)


@dataclass(frozen=True)
class QVector:
    """Tail-occupancy profile (q_0, ..., q_J) with q_0 = 1, nonincreasing, in [0,1]."""
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.ndim != 1 or arr.size < 2:
            raise InvalidStateError(f"QVector needs a 1-d array with depth >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidStateError("QVector entries must be finite")
        if arr[0] != 1.0:
            raise InvalidStateError(f"QVector requires q_0 == 1, got {arr[0]!r}")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise InvalidStateError("QVector entries must lie in [0, 1]")
        if np.any(np.diff(arr) > 0.0):
            i = int(np.argmax(np.diff(arr) > 0.0))
            raise InvalidStateError(f"QVector must be nonincreasing, q_{i} < q_{i + 1}")
        object.__setattr__(self, "values", arr)

    @property
    def depth(self) -> int:
        return self.values.size - 1

    def __len__(self):
        return self.values.size

    def __getitem__(self, i):
        return self.values[i]

    def padded(self, depth: int) -> np.ndarray:
        """Values extended with zeros (or cut) to depth J, as a writable copy."""
        out = np.zeros(depth + 1)
        m = min(depth, self.depth) + 1
        out[:m] = self.values[:m]
        return out

    def is_buffered(self, buffer: int) -> bool:
        """True when the vector lies in the buffered state space (q_i = 0 for i > K)."""
        return bool(np.all(self.values[buffer + 1:] == 0.0))

    @classmethod
    def projected(cls, values: Sequence[float]) -> "QVector":
        """Build a QVector from values carrying round-off (clip and restore monotonicity)."""
        arr = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
        arr[0] = 1.0
        arr = np.minimum.accumulate(arr)
        return cls(arr)

    def to_dict(self) -> dict:
        return {"depth": self.depth, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "QVector":
        return cls(np.asarray(data["values"], dtype=float))


@dataclass(frozen=True)
class MuVector:
    """Occupancy measure (mu_0, ..., mu_J); entries in [0,1] summing to one."""
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidMeasureError(f"MuVector needs a non-empty 1-d array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
            raise InvalidMeasureError("MuVector entries must lie in [0, 1]")
        total = float(np.sum(arr))
        if abs(total - 1.0) > MEASURE_TOL:
            raise InvalidMeasureError(f"MuVector entries must sum to 1, got {total!r}")
        object.__setattr__(self, "values", arr)

    @property
    def depth(self) -> int:
        return self.values.size - 1


@dataclass(frozen=True)
class FiniteQVector:
    """Integer tail counts (n q_0, ..., n q_J) of an n-server system, counts[0] == n."""
    counts: np.ndarray = field(repr=False)
    n: int

    def __post_init__(self):
        arr = np.array(self.counts, dtype=np.int64)
        if arr.ndim != 1 or arr.size < 2:
            raise InvalidStateError(f"FiniteQVector needs depth >= 1, got shape {arr.shape}")
        if self.n < 1:
            raise InvalidStateError(f"n must be >= 1, got: {self.n}")
        if arr[0] != self.n:
            raise InvalidStateError(f"counts[0] must equal n={self.n}, got {arr[0]}")
        if np.any(arr < 0) or np.any(arr > self.n):
            raise InvalidStateError(f"counts must lie in 0..{self.n}")
        if np.any(np.diff(arr) > 0):
            raise InvalidStateError("counts must be nonincreasing")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)
        object.__setattr__(self, "n", int(self.n))

    @property
    def depth(self) -> int:
        return self.counts.size - 1

    def count(self, i: int) -> int:
        """n q_i, zero beyond the truncation depth."""
        return int(self.counts[i]) if i <= self.depth else 0

    def scaled(self) -> QVector:
        return QVector(self.counts / self.n)

    def to_lengths(self) -> np.ndarray:
        """Queue lengths sorted in decreasing order (one entry per server)."""
        mu = self.counts - np.append(self.counts[1:], 0)
        return np.repeat(np.arange(self.depth + 1), mu)[::-1].copy()

    # -----------------------------------------------------------------
    # Constructors
    # -----------------------------------------------------------------

    @classmethod
    def empty(cls, n: int, depth: int) -> "FiniteQVector":
        counts = np.zeros(depth + 1, dtype=np.int64)
        counts[0] = n
        return cls(counts, n)

    @classmethod
    def all_length(cls, n: int, m: int, depth: int) -> "FiniteQVector":
        if m < 0 or m > depth:
            raise DomainError(f"queue length must lie in 0..{depth}, got: {m}")
        counts = np.zeros(depth + 1, dtype=np.int64)
        counts[:m + 1] = n
        return cls(counts, n)

    @classmethod
    def from_lengths(cls, lengths: Sequence[int], depth: int) -> "FiniteQVector":
        lengths = np.asarray(lengths, dtype=np.int64)
        if lengths.size == 0 or np.any(lengths < 0):
            raise DomainError("lengths must be a non-empty array of non-negative integers")
        if lengths.max() > depth:
            raise DomainError(f"queue length {lengths.max()} exceeds depth {depth}")
        counts = np.array([(lengths >= i).sum() for i in range(depth + 1)], dtype=np.int64)
        return cls(counts, int(lengths.size))

    @classmethod
    def round_from(cls, q: QVector, n: int, depth: Optional[int] = None) -> "FiniteQVector":
        """Nearest n-server state by largest-remainder rounding of the measure.

        Rounding n*mu_i keeps the measure non-negative, so the tail sums stay
        nonincreasing and |n q_i - round| < J + 1 per coordinate.
        """
        depth = q.depth if depth is None else depth
        qv = q.padded(depth)
        mu = qv - np.append(qv[1:], 0.0)
        target = n * mu
        base = np.floor(target).astype(np.int64)
        remainder = n - int(base.sum())
        if remainder > 0:
            # stable sort: ties go to the lower level
            order = np.argsort(-(target - base), kind="stable")
            base[order[:remainder]] += 1
        counts = np.cumsum(base[::-1])[::-1]
        return cls(counts.astype(np.int64), n)

    def to_dict(self) -> dict:
        return {"n": self.n, "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteQVector":
        return cls(np.asarray(data["counts"], dtype=np.int64), int(data["n"]))


def mu_to_q(mu: MuVector) -> QVector:
    """q_i = sum_{j >= i} mu_j, with q_0 pinned to 1."""
    if not isinstance(mu, MuVector):
        mu = MuVector(np.asarray(mu, dtype=float))
    q = np.cumsum(mu.values[::-1])[::-1].copy()
    q[0] = 1.0
    if q.size == 1:
        q = np.append(q, 0.0)
    return QVector(np.minimum(np.clip(q, 0.0, 1.0), 1.0))


def q_to_mu(q: QVector) -> MuVector:
    """mu_i = q_i - q_{i+1}; the entry beyond the depth is 0."""
    if not isinstance(q, QVector):
        q = QVector(np.asarray(q, dtype=float))
    return MuVector(q.values - np.append(q.values[1:], 0.0))
