# jsqd/rates/rate_function.py
"""
Moderate-deviation rate function of the JSQ(d) occupancy process.

For a deviation path eta around a fluid solution Q the reduced control is

    phi_j = eta'_j - Db(Q)[eta]_j

and the rate is

    I(eta) = 1/2 sum_j int_0^T 1{denom_j > 0} phi_j^2 / denom_j dt,
    denom_j = lambda (Q_{j-1}^d - Q_j^d) + (Q_j - Q_{j+1}),

which is infinite as soon as phi_j is nonzero where denom_j vanishes.

Paths are piecewise linear: eta' is the forward difference on each
subinterval and every integral uses 3-point Gauss-Legendre nodes per
subinterval with Q and eta interpolated linearly.

Around a constant profile given at full precision (`rate_at_profile`) the
coefficients of Db and the weights s_j^2 / denom_j are formed in mpmath on
the path's own scale s_j, so coordinates whose profile entries underflow
doubles still contribute their true share.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import mpmath
import numpy as np

from jsqd.config import cfg
from jsqd.error_handling import ErrorHandler, InvalidPathError, NumericalError
from jsqd.fluid.stationary import WORKING_DPS
from jsqd.occupancy.drift import linearized_drift_array
from jsqd.occupancy.vectors import ModelParams
from jsqd.paths import Control, PLPath, require_same_grid

GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(3)
# Nodes as fractions of a subinterval and weights summing to one
NODE_FRACTIONS = (GAUSS_NODES + 1.0) / 2.0
NODE_WEIGHTS = GAUSS_WEIGHTS / 2.0

MASS_TOL = 1e-12
TRUNCATION_TOL = 1e-10


@dataclass
class RateBreakdown:
    """Total rate, per-coordinate contributions and the reason for an infinite value."""
    total: float
    per_coordinate: np.ndarray = field(repr=False)
    reason: Optional[str] = None
    truncation: float = 0.0

    @property
    def finite(self) -> bool:
        return math.isfinite(self.total)

    @classmethod
    def infinite(cls, depth: int, reason: str) -> "RateBreakdown":
        return cls(total=math.inf, per_coordinate=np.zeros(depth + 1), reason=reason)

    def to_dict(self) -> dict:
        return {"total": self.total if self.finite else "inf",
                "per_coordinate": self.per_coordinate.tolist(),
                "reason": self.reason,
                "truncation": self.truncation}

    @classmethod
    def from_dict(cls, data: dict) -> "RateBreakdown":
        total = data["total"]
        return cls(total=math.inf if total == "inf" else float(total),
                   per_coordinate=np.asarray(data.get("per_coordinate", []), dtype=float),
                   reason=data.get("reason"), truncation=float(data.get("truncation", 0.0)))


def _tolerances(denom_tol, zero_tol):
    return (cfg.get("denom_tol") if denom_tol is None else denom_tol,
            cfg.get("zero_tol") if zero_tol is None else zero_tol)


def rate_denominators(Q: np.ndarray, params: ModelParams) -> np.ndarray:
    """denom_j = lambda (Q_{j-1}^d - Q_j^d) + (Q_j - Q_{j+1}) along the last axis; entry 0 is 0.

    In buffered mode coordinates above K are 0 and Q_{K+1} is dropped at K.
    """
    d = params.d
    qd = Q ** d
    out = np.zeros_like(Q)
    nxt = np.zeros_like(Q)
    nxt[..., :-1] = Q[..., 1:]
    out[..., 1:] = params.lam * (qd[..., :-1] - qd[..., 1:]) + Q[..., 1:] - nxt[..., 1:]
    K = params.buffer
    if K is not None and K + 1 < Q.shape[-1]:
        out[..., K] += Q[..., K + 1]
        out[..., K + 1:] = 0.0
    return out


def _require_deviation(eta: PLPath):
    drift0 = float(np.max(np.abs(eta.values[:, 0])))
    if drift0 > MASS_TOL:
        raise InvalidPathError(f"deviation path must have eta_0 = 0, found |eta_0| up to {drift0:.3e}")


def _controls_at_nodes(eta: PLPath, Q: PLPath, params: ModelParams):
    """(phi, denom) at the Gauss nodes, each of shape (M, 3, J+1)."""
    eta_nodes = eta.at_fractions(NODE_FRACTIONS)
    q_nodes = Q.at_fractions(NODE_FRACTIONS)
    slopes = eta.slopes()[:, None, :]
    phi = slopes - linearized_drift_array(q_nodes, eta_nodes, params.lam, params.d, params.buffer)
    phi[..., 0] = 0.0
    if params.buffer is not None:
        phi[..., params.buffer + 1:] = 0.0
    return phi, rate_denominators(q_nodes, params)


def phi_from_path(eta: PLPath, Q: PLPath, params: ModelParams) -> Control:
    """Reduced control at the grid nodes.

    At node t_m the forward difference of [t_m, t_{m+1}] is used (the backward
    one at t_M), with Db evaluated at the node.
    """
    require_same_grid(eta, Q)
    eta = eta.physical()
    slopes = eta.slopes()
    node_slopes = np.vstack([slopes, slopes[-1:]])
    phi = node_slopes - linearized_drift_array(Q.values, eta.values, params.lam, params.d, params.buffer)
    phi[:, 0] = 0.0
    if params.buffer is not None:
        phi[:, params.buffer + 1:] = 0.0
    return Control(eta.T, phi)


def _blocked(blocked: np.ndarray, phi: np.ndarray, dt: float, why: str) -> Optional[RateBreakdown]:
    blocked[..., 0] = False
    if not blocked.any():
        return None
    m, k, j = np.argwhere(blocked)[0]
    t = (m + NODE_FRACTIONS[k]) * dt
    return RateBreakdown.infinite(phi.shape[-1] - 1, f"coordinate {j} at t={t:.6g}: {why} {phi[m, k, j]:.3e}")


def quadratic_cost(phi: np.ndarray, denom: np.ndarray, dt: float, denom_tol: float, zero_tol: float) -> RateBreakdown:
    """1/2 sum_j int phi_j^2 / denom_j from node values of shape (M, 3, J+1)."""
    dead = denom <= denom_tol
    infinite = _blocked(dead & (np.abs(phi) > zero_tol), phi, dt, "zero denominator with nonzero control")
    if infinite is not None:
        return infinite
    safe = np.where(dead, 1.0, denom)
    integrand = np.where(dead, 0.0, phi ** 2 / safe)
    per_coord = 0.5 * dt * np.einsum("mkj,k->j", integrand, NODE_WEIGHTS)
    per_coord[0] = 0.0
    return RateBreakdown(total=float(np.sum(per_coord)), per_coordinate=per_coord)


def check_depth(out: RateBreakdown, last: int, depth: int, strict: bool = False,
                log_callback: Optional[Callable] = None) -> RateBreakdown:
    """Record the last included term as the truncation diagnostic.

    A term >= TRUNCATION_TOL means the depth is too shallow for this path:
    NumericalError when strict, a logged warning otherwise.
    """
    if not out.finite:
        return out
    out.truncation = float(abs(out.per_coordinate[last]))
    if out.truncation >= TRUNCATION_TOL:
        error = NumericalError(f"last included term at coordinate {last} is {out.truncation:.3e} >= {TRUNCATION_TOL:g}")
        if strict:
            raise error
        ErrorHandler.log_warning(log_callback or print, "Truncation check", error, f"depth {depth}")
    return out


def rate_I(eta: PLPath, Q: PLPath, params: ModelParams, denom_tol: Optional[float] = None,
           zero_tol: Optional[float] = None, log_callback: Optional[Callable] = None,
           strict: bool = False) -> RateBreakdown:
    """I(eta) = 1/2 sum_j int 1{denom_j > 0} phi_j^2 / denom_j dt.

    Without a buffer the truncation diagnostic is taken at the deepest
    coordinate whose denominator is positive somewhere on the grid; below
    it the profile has underflowed and the path's tail is lost.
    """
    require_same_grid(eta, Q)
    eta = eta.physical()
    _require_deviation(eta)
    denom_tol, zero_tol = _tolerances(denom_tol, zero_tol)
    phi, denom = _controls_at_nodes(eta, Q, params)
    out = quadratic_cost(phi, denom, eta.dt, denom_tol, zero_tol)
    if params.buffer is not None:
        if out.finite:
            out.truncation = float(abs(out.per_coordinate[params.buffer]))
        return out
    alive = np.flatnonzero(np.any(denom > denom_tol, axis=(0, 1)))
    last = int(alive[-1]) if alive.size else 0
    return check_depth(out, last, eta.depth, strict, log_callback)


def control_cost(phi: Control, Q: PLPath, params: ModelParams, denom_tol: Optional[float] = None,
                 zero_tol: Optional[float] = None) -> RateBreakdown:
    """1/2 sum_j int phi_j^2 / denom_j for a control given directly (linear between nodes)."""
    require_same_grid(phi, Q)
    phi = phi.physical()
    denom_tol, zero_tol = _tolerances(denom_tol, zero_tol)
    phi_nodes = phi.at_fractions(NODE_FRACTIONS)
    denom = rate_denominators(Q.at_fractions(NODE_FRACTIONS), params)
    return quadratic_cost(phi_nodes, denom, phi.dt, denom_tol, zero_tol)


def rate_I_mu(eta_tilde: PLPath, Q: PLPath, params: ModelParams, **kwargs) -> RateBreakdown:
    """Rate of an occupancy-measure deviation: eta_i = sum_{j >= i} tilde_eta_j."""
    require_same_grid(eta_tilde, Q)
    eta = eta_tilde.tail_sums()
    mass = float(np.max(np.abs(eta.values[:, 0])))
    if mass > MASS_TOL:
        return RateBreakdown.infinite(eta.depth, f"mass not conserved: |sum_j tilde_eta_j| up to {mass:.3e}")
    values = eta.values.copy()
    values[:, 0] = 0.0
    return rate_I(PLPath(eta.T, values), Q, params, **kwargs)


@dataclass
class ProfileCoefficients:
    """Db and quadrature weights around a constant profile, on a path scale s_j.

    For eta_j = s_j v_j the control is phi_j = s_j psi_j with

        psi_j = v'_j - lower_j v_{j-1} + diagonal_j v_j - upper_j v_{j+1}

    and coordinate j costs 1/2 int weight_j psi_j^2 dt, weight_j = s_j^2 / denom_j.
    """
    lower: np.ndarray
    diagonal: np.ndarray
    upper: np.ndarray
    weight: np.ndarray
    dead: np.ndarray
    scale: np.ndarray = field(repr=False)

    def controls(self, v_nodes: np.ndarray, v_slopes: np.ndarray) -> np.ndarray:
        below = np.zeros_like(v_nodes)
        below[..., 1:] = v_nodes[..., :-1]
        above = np.zeros_like(v_nodes)
        above[..., :-1] = v_nodes[..., 1:]
        psi = v_slopes - self.lower * below + self.diagonal * v_nodes - self.upper * above
        # coordinate 0 and coordinates above the buffer
        psi[..., self.diagonal == 0.0] = 0.0
        return psi


def profile_coefficients(profile: Sequence, log_scale: np.ndarray, params: ModelParams,
                         denom_tol: float = 0.0) -> ProfileCoefficients:
    """Coefficients for the constant profile Q_0..Q_L (entries past L are 0) at full precision.

    In buffered mode coordinates above K carry nothing and the Q_{K+1}, p_{K+1}
    terms are dropped at K, as in `rate_denominators` and the linearized drift.
    """
    depth = len(log_scale) - 1
    d, K = params.d, params.buffer
    lower, diagonal, upper, weight = (np.zeros(depth + 1) for _ in range(4))
    dead = np.ones(depth + 1, dtype=bool)
    dead[0] = False
    with mpmath.workdps(WORKING_DPS):
        lam = mpmath.mpf(params.lam)
        q = [mpmath.mpf(x) for x in list(profile)[:depth + 1]]
        q += [mpmath.mpf(0)] * (depth + 2 - len(q))
        s = [mpmath.exp(mpmath.mpf(float(x))) for x in log_scale]
        for j in range(1, depth + 1):
            if K is not None and j > K:
                continue
            closed = j == depth or (K is not None and j == K)
            nxt = mpmath.mpf(0) if closed else q[j + 1]
            denom = lam * (q[j - 1] ** d - q[j] ** d) + q[j] - nxt
            diagonal[j] = float(d * lam * q[j] ** (d - 1) + 1)
            if j > 1:
                lower[j] = float(d * lam * q[j - 1] ** (d - 1) * s[j - 1] / s[j])
            if not closed:
                upper[j] = float(s[j + 1] / s[j])
            if denom > denom_tol:
                weight[j] = float(s[j] ** 2 / denom)
                dead[j] = False
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        bad = int(np.flatnonzero(~np.isfinite(lower + upper))[0])
        raise NumericalError(f"path scale jumps beyond double range around coordinate {bad}")
    return ProfileCoefficients(lower=lower, diagonal=diagonal, upper=upper, weight=weight,
                               dead=dead, scale=np.exp(np.asarray(log_scale, dtype=float)))


def rate_at_profile(eta: PLPath, profile: Sequence, params: ModelParams, denom_tol: Optional[float] = None,
                    zero_tol: Optional[float] = None, log_callback: Optional[Callable] = None,
                    strict: bool = False) -> RateBreakdown:
    """I(eta) around the constant profile `profile` (mpmath or float entries Q_0..Q_L).

    eta keeps its log_scale throughout. The zero-denominator rule applies to
    the full-precision denominators and to the physical size s_j |psi_j| of
    the control; a weight beyond double range with a nonzero control is
    an infinite rate.
    """
    _require_deviation(eta)
    denom_tol, zero_tol = _tolerances(denom_tol, zero_tol)
    log_scale = eta.log_scale if eta.log_scale is not None else np.zeros(eta.depth + 1)
    coef = profile_coefficients(profile, log_scale, params, denom_tol)
    psi = coef.controls(eta.at_fractions(NODE_FRACTIONS), eta.slopes()[:, None, :])

    with np.errstate(over="ignore", invalid="ignore"):
        physical = np.abs(psi) * coef.scale
    infinite = _blocked(coef.dead & (physical > zero_tol), psi, eta.dt, "zero denominator with nonzero control")
    if infinite is None:
        huge = ~np.isfinite(coef.weight) & (psi != 0.0)
        infinite = _blocked(huge, psi, eta.dt, "weight beyond double range with nonzero control")
    if infinite is not None:
        return infinite
    live = np.isfinite(coef.weight) & ~coef.dead
    w = np.where(live, coef.weight, 0.0)
    integrand = w * psi ** 2
    per_coord = 0.5 * eta.dt * np.einsum("mkj,k->j", integrand, NODE_WEIGHTS)
    per_coord[0] = 0.0
    out = RateBreakdown(total=float(np.sum(per_coord)), per_coordinate=per_coord)
    if params.buffer is not None:
        out.truncation = float(abs(per_coord[min(params.buffer, eta.depth)]))
        return out
    return check_depth(out, eta.depth, eta.depth, strict, log_callback)


def solve_controlled_ode(phi: Control, Q: PLPath, params: ModelParams,
                         epsilon: Optional[PLPath] = None) -> PLPath:
    """eta' = Db(Q(t))[eta] + phi(t) (+ epsilon'(t)), eta(0) = epsilon(0), by RK4 on the path grid.

    Q and phi are linear between nodes, so the half-step values are exact
    interpolants; epsilon' is the forward difference on each subinterval.
    """
    require_same_grid(phi, Q, epsilon)
    epsilon = epsilon.physical() if epsilon is not None else None
    lam, d, K = params.lam, params.d, params.buffer
    h = phi.dt
    qv, fv = Q.values, phi.values
    forcing = epsilon.slopes() if epsilon is not None else None
    eta = np.zeros_like(fv)
    if epsilon is not None:
        eta[0] = epsilon.values[0]

    def rhs(x, q, f):
        out = linearized_drift_array(q, x, lam, d, K) + f
        out[0] = 0.0
        return out

    for m in range(phi.M):
        q0, q1 = qv[m], qv[m + 1]
        f0, f1 = fv[m], fv[m + 1]
        qh, fh = 0.5 * (q0 + q1), 0.5 * (f0 + f1)
        if forcing is not None:
            f0, fh, f1 = f0 + forcing[m], fh + forcing[m], f1 + forcing[m]
        x = eta[m]
        k1 = rhs(x, q0, f0)
        k2 = rhs(x + 0.5 * h * k1, qh, fh)
        k3 = rhs(x + 0.5 * h * k2, qh, fh)
        k4 = rhs(x + h * k3, q1, f1)
        eta[m + 1] = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if K is not None:
        eta[:, K + 1:] = 0.0
    return PLPath(phi.T, eta)


def split_control_cost(phi: Control, Q: PLPath, params: ModelParams, weights: np.ndarray) -> RateBreakdown:
    """Cost of a control that splits phi_j over the arrival and departure indicator sets.

    The arrival set has measure a_j = lambda (Q_{j-1}^d - Q_j^d) and the
    departure set c_j = Q_j - Q_{j+1}. Putting the share w_j of phi_j on the
    arrival set (constant density) and 1 - w_j on the departure set costs
    1/2 int [ (w phi)^2 / a + ((1-w) phi)^2 / c ], which is never below the
    rate: the minimum over w is attained at w = a / (a + c).
    In buffered mode both sets are empty above K and the departure set at K
    is Q_K, matching `rate_denominators`.
    """
    require_same_grid(phi, Q)
    w = np.asarray(weights, dtype=float)
    phi_nodes = phi.at_fractions(NODE_FRACTIONS)
    q_nodes = Q.at_fractions(NODE_FRACTIONS)
    d = params.d
    qd = q_nodes ** d
    arrivals = np.zeros_like(q_nodes)
    departures = np.zeros_like(q_nodes)
    arrivals[..., 1:] = params.lam * (qd[..., :-1] - qd[..., 1:])
    departures[..., 1:-1] = q_nodes[..., 1:-1] - q_nodes[..., 2:]
    departures[..., -1] = q_nodes[..., -1]
    K = params.buffer
    if K is not None and K + 1 < q_nodes.shape[-1]:
        departures[..., K] += q_nodes[..., K + 1]
        arrivals[..., K + 1:] = 0.0
        departures[..., K + 1:] = 0.0

    def piece(share, measure):
        part = share * phi_nodes
        dead = measure <= 0.0
        if np.any(dead & (np.abs(part) > 0.0)):
            return None
        return np.where(dead, 0.0, part ** 2 / np.where(dead, 1.0, measure))

    a = piece(w, arrivals)
    c = piece(1.0 - w, departures)
    depth = phi.depth
    if a is None or c is None:
        return RateBreakdown.infinite(depth, "split control puts mass on an empty indicator set")
    per_coord = 0.5 * phi.dt * np.einsum("mkj,k->j", a + c, NODE_WEIGHTS)
    per_coord[0] = 0.0
    return RateBreakdown(total=float(np.sum(per_coord)), per_coordinate=per_coord)
