# jsqd/fluid/stationary.py
"""
Stationary profiles of the fluid ODE (lambda < 1).

Unbuffered:  Q*_j = lambda^((d^j - 1)/(d - 1))            (lambda^j when d = 1)
Buffered K:  Q*_j(K) = lambda Q*_{j-1}(K)^d - e,   e = lambda Q*_K(K)^d

Q*_K underflows doubles already for moderate K (Q*_10 = 2^-1023 at
lambda = 0.5, d = 2), so the buffered fixed point is computed with mpmath
in relative gaps r_j = 1 - Q*_j(K) / Q*_j:

    r_0 = 0,  r_j = 1 - (1 - r_{j-1})^d + e / Q*_j

The fixed point is e = Q*_{K+1} (1 - r_K)^d. Writing e = (1 - v) Q*_{K+1},
the root of v + ((1 - r_K)^d - 1) is taken by geometric bisection with
expm1/log1p, so nothing cancels even when v is far below the working
precision of 1.
"""
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional

import mpmath
import numpy as np

from jsqd.error_handling import DomainError, NumericalError
from jsqd.occupancy.vectors import ModelParams, QVector

WORKING_DPS = 60
BISECTION_STEPS = 200


def _require_subcritical(params: ModelParams):
    if not params.lam < 1.0:
        raise DomainError(f"lambda must be < 1 for stationary-profile rates, got: {params.lam}")


def stationary_exponent(j: int, d: int) -> int:
    """(d^j - 1)/(d - 1), i.e. 1 + d + ... + d^(j-1)."""
    return j if d == 1 else (d ** j - 1) // (d - 1)


def stationary_profile(params: ModelParams, depth: Optional[int] = None) -> QVector:
    _require_subcritical(params)
    depth = params.depth if depth is None else depth
    lam, d = params.lam, params.d
    values = [1.0] + [lam ** stationary_exponent(j, d) for j in range(1, depth + 1)]
    return QVector(np.array(values))


def stationary_profile_mp(lam, d: int, depth: int) -> List[mpmath.mpf]:
    lam = mpmath.mpf(lam)
    return [lam ** stationary_exponent(j, d) for j in range(depth + 1)]


@dataclass
class BufferedSolution:
    """Buffered fixed point at full precision, plus the float profile."""
    K: int
    e: mpmath.mpf
    profile_mp: List[mpmath.mpf]
    gaps_mp: List[mpmath.mpf]
    profile: QVector = field(repr=False)

    def gap_ratio(self) -> mpmath.mpf:
        """max_j e_j(K) / Q*_K."""
        return max(self.gaps_mp[1:]) / (self.profile_mp[self.K] + self.gaps_mp[self.K])


def _relative_gaps(lam, d: int, K: int, v) -> List[mpmath.mpf]:
    """r_0..r_K for e = (1 - v) Q*_{K+1}."""
    top = stationary_exponent(K + 1, d)
    gaps = [mpmath.mpf(0)]
    for j in range(1, K + 1):
        # e / Q*_j = (1 - v) lambda^(E_{K+1} - E_j)
        inflow = (1 - v) * lam ** (top - stationary_exponent(j, d))
        gaps.append(-mpmath.expm1(d * mpmath.log1p(-gaps[-1])) + inflow)
        if gaps[-1] >= 1:
            break
    return gaps


def _fixed_point_residual(lam, d: int, K: int, v):
    """v + (1 - r_K)^d - 1: increasing in v, negative below the root."""
    gaps = _relative_gaps(lam, d, K, v)
    if len(gaps) <= K or gaps[K] >= 1:
        return v - 1
    return v + mpmath.expm1(d * mpmath.log1p(-gaps[K]))


def solve_buffered(params: ModelParams, K: Optional[int] = None) -> BufferedSolution:
    """Solve e = lambda Q*_K(K)^d for e = (1 - v) Q*_{K+1} by geometric bisection on v.

    With t = Q*_{K+1} / Q*_K the root lies in [t / 2, 1]: the residual is at
    most t (t - 1) / 2 < 0 at the left end and equals 1 at v = 1.
    """
    _require_subcritical(params)
    K = params.buffer if K is None else K
    if K is None or K < 1:
        raise DomainError(f"buffer K must be >= 1, got: {K}")
    if params.lam <= 0.0:
        raise DomainError(f"lambda must be > 0 for a buffered profile, got: {params.lam}")
    depth = max(params.depth, K + 2)
    d = params.d
    with mpmath.workdps(WORKING_DPS):
        lam = mpmath.mpf(params.lam)
        qstar = stationary_profile_mp(lam, d, K + 1)
        t = qstar[K + 1] / qstar[K]
        lo, hi = t / 2, mpmath.mpf(1)
        r_lo = _fixed_point_residual(lam, d, K, lo)
        if not r_lo < 0:
            raise NumericalError(f"buffered fixed point not bracketed for K={K}: residual {mpmath.nstr(r_lo, 5)} at v={mpmath.nstr(lo, 5)}")
        for _ in range(BISECTION_STEPS):
            mid = mpmath.sqrt(lo * hi)
            if _fixed_point_residual(lam, d, K, mid) < 0:
                lo = mid
            else:
                hi = mid
        v = mpmath.sqrt(lo * hi)
        e = (1 - v) * qstar[K + 1]
        ratios = _relative_gaps(lam, d, K, v)
        gaps = [qstar[j] * ratios[j] for j in range(K + 1)]
        profile_mp = [qstar[j] * (1 - ratios[j]) for j in range(K + 1)]

        # Q*_1(K) = lambda - lambda Q*_K(K)^d
        check = abs(profile_mp[1] - (lam - lam * profile_mp[K] ** d))
        if check > mpmath.mpf(10) ** (-30):
            raise NumericalError(f"buffered fixed point residual {mpmath.nstr(check, 5)} for K={K}")

        values = np.zeros(depth + 1)
        values[:K + 1] = [float(x) for x in profile_mp]
        values[0] = 1.0
        return BufferedSolution(K=K, e=+e, profile_mp=[+x for x in profile_mp],
                                gaps_mp=[+x for x in gaps], profile=QVector(values))


def stationary_profile_buffered(params: ModelParams) -> QVector:
    return solve_buffered(params).profile


@dataclass
class StationaryReport:
    """Stationary profile, buffered profile at the largest K and the gap table over K."""
    profile: QVector
    buffered_profile: Optional[QVector]
    gaps: List[float]
    fitted_C: float
    rows: List[dict] = field(default_factory=list)
    e: float = 0.0
    log10_e: float = float("-inf")

    def to_dict(self) -> dict:
        return {
            "profile": self.profile.values.tolist(),
            "buffered": None if self.buffered_profile is None else self.buffered_profile.values.tolist(),
            "e": self.e,
            "log10_e": self.log10_e,
            "gaps": list(self.gaps),
            "fitted_C": self.fitted_C,
            "table": self.rows,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StationaryReport":
        buffered = data.get("buffered")
        return cls(profile=QVector(np.asarray(data["profile"], dtype=float)),
                   buffered_profile=None if buffered is None else QVector(np.asarray(buffered, dtype=float)),
                   gaps=list(data.get("gaps", [])), fitted_C=float(data["fitted_C"]),
                   rows=list(data.get("table", [])), e=float(data.get("e", 0.0)),
                   log10_e=float(data.get("log10_e", float("-inf"))))

    def csv_header(self) -> List[str]:
        return ["K", "e", "log10_e", "max_gap_ratio", "log10_max_gap_ratio", "C_K"]

    def csv_rows(self) -> List[list]:
        return [[r[h] for h in self.csv_header()] for r in self.rows]


def buffer_gap_report(params: ModelParams, K_range: Iterable[int],
                      log_callback: Optional[Callable] = None) -> StationaryReport:
    """Tabulate e(K), max_j e_j(K) / Q*_K and C_K = ratio / (Q*_K)^(d-1) over K.

    fitted_C is the smallest constant with ratio(K) <= C (Q*_K)^(d-1) on the range.
    """
    _require_subcritical(params)
    Ks = sorted(set(int(k) for k in K_range))
    if not Ks or Ks[0] < 1:
        raise DomainError(f"K range must contain integers >= 1, got: {Ks}")
    rows = []
    solution = None
    with mpmath.workdps(WORKING_DPS):
        for K in Ks:
            solution = solve_buffered(params, K)
            qstar_K = stationary_profile_mp(params.lam, params.d, K)[K]
            ratio = solution.gap_ratio()
            C_K = ratio / qstar_K ** (params.d - 1) if params.d > 1 else ratio
            rows.append({
                "K": K,
                "e": float(solution.e),
                "log10_e": float(mpmath.log10(solution.e)),
                "max_gap_ratio": float(ratio),
                "log10_max_gap_ratio": float(mpmath.log10(ratio)),
                "C_K": float(C_K),
            })
            if log_callback:
                log_callback(f"[Fluid] K={K}: log10 e={rows[-1]['log10_e']:.3f}, C_K={rows[-1]['C_K']:.6f}")
    fitted = max(r["C_K"] for r in rows)
    depth = max(params.depth, Ks[-1] + 2)
    return StationaryReport(profile=stationary_profile(params, depth),
                            buffered_profile=solution.profile,
                            gaps=[float(g) for g in solution.gaps_mp[1:]],
                            fitted_C=fitted, rows=rows, e=float(solution.e),
                            log10_e=float(mpmath.log10(solution.e)))
