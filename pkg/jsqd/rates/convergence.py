# jsqd/rates/convergence.py
"""
K -> infinity study: I^{Q*(K)}(q^K) and I^{Q*}(q^K) against I^{Q*}(q),
next to the tail criterion that controls the gap.
"""
import math
from typing import Callable, Optional

import numpy as np
from scipy import stats

from jsqd.error_handling import DomainError, ErrorHandler
from jsqd.occupancy.vectors import ModelParams
from jsqd.paths import PLPath
from jsqd.reports import ExperimentReport
from jsqd.rates.buffered import rate_buffered, rate_stationary, tail_criterion

COLUMNS = ["K", "I_buffered", "I_truncated", "criterion", "gap_buffered", "gap_truncated"]
TRACKING_CORRELATION = 0.9


def is_monotone_decreasing(values, allowed_inversions: int = 1, rtol: float = 1e-12) -> bool:
    """True when at most `allowed_inversions` consecutive pairs increase."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        return True
    rises = x[1:] > x[:-1] * (1.0 + rtol) + 1e-300
    return int(np.count_nonzero(rises)) <= allowed_inversions


def tracks(gaps, criteria, threshold: float = TRACKING_CORRELATION) -> tuple:
    """(flag, rho): whether gap and criterion move together along K (Spearman rank correlation)."""
    g = np.asarray(gaps, dtype=float)
    c = np.asarray(criteria, dtype=float)
    if not np.any(g) and not np.any(c):
        return True, float("nan")
    if g.size < 3 or not (np.all(np.isfinite(g)) and np.all(np.isfinite(c))):
        return False, float("nan")
    rho = stats.spearmanr(g, c)[0]
    if math.isnan(rho):
        return False, rho
    return bool(rho > threshold), float(rho)


def convergence_study(q: PLPath, K_max: int, params: ModelParams, K_min: int = 2,
                      log_callback: Optional[Callable] = None, strict: bool = False) -> ExperimentReport:
    """Tabulate the buffered and truncated rates of q over K = K_min..K_max.

    I^{Q*}(q) is taken at the depth of q; its last included term is kept in
    meta["truncation"] (strict turns a term >= 1e-10 into NumericalError).
    """
    if not params.lam < 1.0:
        raise DomainError(f"lambda must be < 1 for stationary-profile rates, got: {params.lam}")
    if K_min < 1 or K_max < K_min:
        raise DomainError(f"need 1 <= K_min <= K_max, got K_min={K_min}, K_max={K_max}")
    if K_max + 2 > q.depth:
        raise DomainError(f"K_max={K_max} needs path depth >= {K_max + 2}, got: {q.depth}")
    log = log_callback or (lambda msg: None)

    full = rate_stationary(q, params, log_callback=log_callback, strict=strict)
    I_full = full.total
    log(f"[RateEngine] I(q) = {I_full:.10g} at depth {q.depth}")

    report = ExperimentReport(name="converge-k", columns=list(COLUMNS))
    for K in range(K_min, K_max + 1):
        buffered = rate_buffered(q, K, params, mode="buffered", log_callback=log_callback).total
        truncated = rate_buffered(q, K, params, mode="truncated", log_callback=log_callback).total
        criterion = tail_criterion(q, K, params)
        if criterion == float("inf"):
            ErrorHandler.log_warning(log_callback or print, "Tail criterion",
                                     ValueError("weight 1/(2 Q*_K) beyond double range with a non-zero numerator"), f"K={K}")
        report.add_row(K=K, I_buffered=buffered, I_truncated=truncated, criterion=criterion,
                       gap_buffered=abs(buffered - I_full), gap_truncated=abs(truncated - I_full))
        log(f"[RateEngine] K={K}: I_buffered={buffered:.6g}, gap={abs(buffered - I_full):.3e}, "
            f"criterion={criterion:.3e}")

    gaps = report.column("gap_buffered")
    criteria = report.column("criterion")
    tracking, rho = tracks(gaps, criteria)
    report.meta = {
        "lambda": params.lam,
        "d": params.d,
        "depth": q.depth,
        "T": q.T,
        "I_full": I_full,
        "truncation": full.truncation,
        "spearman": rho,
        "gap_tracks_criterion": tracking,
        "gap_monotone": is_monotone_decreasing(gaps),
        "criterion_monotone": is_monotone_decreasing(criteria),
    }
    return report
