"""
Tests for the moderate-deviation rate function and the controlled ODE.
"""

import json

import numpy as np
import pytest

from jsqd.error_handling import InvalidPathError, NumericalError, ShapeError
from jsqd.fluid import solve_buffered, stationary_profile
from jsqd.fluid.stationary import stationary_profile_mp
from jsqd.occupancy.vectors import ModelParams
from jsqd.paths import Control, PLPath
from jsqd.rates import (
    RateBreakdown,
    control_cost,
    family_trajectory,
    phi_from_path,
    rate_at_profile,
    rate_I,
    rate_I_mu,
    rate_denominators,
    rate_stationary,
    solve_controlled_ode,
    split_control_cost,
)
from tests.conftest import TestHelpers

# eta = (0, 0.1 t, 0, ...) on [0, 1] around Q* at lambda = 0.5, d = 2:
# phi_1 = 0.1 + 0.15 t, phi_2 = -0.05 t, denominators 0.75 and 0.234375
LINEAR_RATE = 0.5 * ((0.01 + 0.015 + 0.0075) / 0.75 + (0.0025 / 3.0) / 0.234375)


def _linear_path(T: float = 1.0, M: int = 10, depth: int = 8) -> PLPath:
    return PLPath.from_function(lambda t: [0.0, 0.1 * t], T, M, depth)


def _silent(message: str) -> None:
    pass


def _family_a_term(j: int) -> float:
    """Share of coordinate j in I(q) for family A with c_j = 1/j once the couplings are negligible.

    psi_j = a_j (f' + f) with a_j = (j - 1) / j^2, weight 1/2 and int (f' + f)^2 = 8/3.
    """
    a = (j - 1) / j ** 2
    return 2.0 * a * a / 3.0


@pytest.mark.unit
class TestRateI:
    """Test I(eta) on closed-form cases."""

    def test_linear_example(self, shallow_params, stationary_path_factory):
        """Test the hand-computed rate 0.0234444..."""
        Q = stationary_path_factory(shallow_params, T=1.0, M=10, depth=8)
        out = rate_I(_linear_path(), Q, shallow_params, denom_tol=0.0, zero_tol=1e-12)
        assert out.finite
        assert out.total == pytest.approx(LINEAR_RATE, rel=1e-12)
        assert out.total == pytest.approx(0.0234444, abs=1e-7)
        assert np.all(out.per_coordinate[3:] == 0.0)
        assert out.truncation == 0.0

    def test_independent_of_grid(self, shallow_params, stationary_path_factory):
        """Test that Gauss nodes integrate the quadratic integrand exactly on any grid."""
        for M in (1, 7, 50):
            Q = stationary_path_factory(shallow_params, T=1.0, M=M, depth=8)
            assert rate_I(_linear_path(M=M), Q, shallow_params).total == pytest.approx(LINEAR_RATE, rel=1e-12)

    def test_zero_path(self, shallow_params, stationary_path_factory):
        """Test that the zero deviation costs nothing."""
        Q = stationary_path_factory(shallow_params, T=1.0, M=20, depth=8)
        assert rate_I(PLPath.zeros(1.0, 20, 8), Q, shallow_params).total == 0.0

    def test_quadratic_homogeneity(self, shallow_params, stationary_path_factory):
        """Test I(c eta) = c^2 I(eta)."""
        rng = np.random.default_rng(4)
        Q = stationary_path_factory(shallow_params, T=1.0, M=40, depth=8)
        eta = TestHelpers.random_control(rng, 1.0, 40, 8)
        base = rate_I(eta, Q, shallow_params, log_callback=_silent).total
        for c in (0.5, 3.0):
            scaled = rate_I(eta.scale(c), Q, shallow_params, log_callback=_silent).total
            assert scaled == pytest.approx(c * c * base, rel=1e-10)

    def test_infinite_on_zero_denominator(self):
        """Test that a control on a dead coordinate gives +inf with a reason."""
        params = ModelParams(lam=0.5, d=2, depth=4)
        Q = PLPath.constant([1.0, 0.0, 0.0, 0.0, 0.0], 1.0, 10)
        eta = PLPath.from_function(lambda t: [0.0, 0.0, 0.1 * t], 1.0, 10, 4)
        out = rate_I(eta, Q, params, denom_tol=0.0, zero_tol=1e-12)
        assert not out.finite
        assert "coordinate 2" in out.reason

    def test_requires_eta0_zero(self, shallow_params, stationary_path_factory):
        """Test that a deviation must have eta_0 = 0."""
        Q = stationary_path_factory(shallow_params, T=1.0, M=10, depth=8)
        eta = PLPath.from_function(lambda t: [0.1 * t], 1.0, 10, 8)
        with pytest.raises(InvalidPathError, match="eta_0 = 0"):
            rate_I(eta, Q, shallow_params)

    def test_grid_mismatch(self, shallow_params, stationary_path_factory):
        """Test that eta and Q must share a grid."""
        Q = stationary_path_factory(shallow_params, T=1.0, M=20, depth=8)
        with pytest.raises(ShapeError):
            rate_I(_linear_path(M=10), Q, shallow_params)

    def test_truncation_warning(self, stationary_path_factory):
        """Test that a large last term is reported through the warning log."""
        params = ModelParams(lam=0.5, d=2, depth=2)
        Q = stationary_path_factory(params, T=1.0, M=10, depth=2)
        eta = PLPath.from_function(lambda t: [0.0, 0.0, 0.1 * t], 1.0, 10, 2)
        messages = []
        out = rate_I(eta, Q, params, log_callback=messages.append)
        assert out.truncation > 0.0
        assert any("[WARNING] Truncation check failed" in m for m in messages)

    def test_diagnostic_at_last_representable_coordinate(self, params, stationary_path_factory):
        """Test that the diagnostic reads the deepest coordinate with a positive double denominator."""
        Q = stationary_path_factory(params, T=2.0, M=200, depth=24)
        q = family_trajectory("A", M=200, params=params).physical()
        messages = []
        out = rate_I(q, Q, params, log_callback=messages.append)
        # Q*_11 and beyond are 0 in doubles
        assert np.all(out.per_coordinate[11:] == 0.0)
        assert out.truncation == out.per_coordinate[10]
        assert out.truncation > 1e-3
        assert any("coordinate 10" in m for m in messages)

    def test_strict_depth_raises(self, shallow_params, stationary_path_factory):
        """Test that strict mode turns the truncation warning into an error."""
        params = ModelParams(lam=0.5, d=2, depth=2)
        Q = stationary_path_factory(params, T=1.0, M=10, depth=2)
        eta = PLPath.from_function(lambda t: [0.0, 0.0, 0.1 * t], 1.0, 10, 2)
        with pytest.raises(NumericalError, match="last included term"):
            rate_I(eta, Q, params, strict=True)
        Q8 = stationary_path_factory(shallow_params, T=1.0, M=10, depth=8)
        assert rate_I(_linear_path(), Q8, shallow_params, strict=True).total == pytest.approx(LINEAR_RATE, rel=1e-12)


@pytest.mark.unit
class TestDenominators:
    """Test the rate denominators."""

    def test_stationary_profile(self, params, qstar):
        """Test denom_j = 2 (Q*_j - Q*_{j+1}) at the stationary profile."""
        q = qstar.values
        denom = rate_denominators(q, params)
        expected = 2.0 * (q[1:-1] - q[2:])
        np.testing.assert_allclose(denom[1:-1], expected, rtol=1e-12, atol=1e-300)
        assert denom[0] == 0.0

    def test_buffered_profile(self):
        """Test denom_K = 2 Q*_K(K) and zeros above K."""
        params = ModelParams(lam=0.5, d=2, buffer=3, depth=6)
        q = solve_buffered(params, 3).profile.values
        denom = rate_denominators(q, params)
        assert denom[3] == pytest.approx(2.0 * q[3], rel=1e-10)
        np.testing.assert_allclose(denom[1:3], 2.0 * (q[1:3] - q[2:4]), rtol=1e-10)
        assert np.all(denom[4:] == 0.0)


@pytest.mark.unit
class TestControls:
    """Test the reduced control and the controlled ODE."""

    def test_phi_from_linear_path(self, shallow_params, stationary_path_factory):
        """Test phi_1 = 0.1 + 0.15 t and phi_2 = -0.05 t at the nodes."""
        Q = stationary_path_factory(shallow_params, T=1.0, M=10, depth=8)
        phi = phi_from_path(_linear_path(), Q, shallow_params)
        t = np.linspace(0.0, 1.0, 11)
        np.testing.assert_allclose(phi.values[:, 1], 0.1 + 0.15 * t, atol=1e-15)
        np.testing.assert_allclose(phi.values[:, 2], -0.05 * t, atol=1e-15)
        assert np.all(phi.values[:, 0] == 0.0)

    def test_controlled_ode_recovers_path(self, shallow_params, stationary_path_factory):
        """Test that solving with phi(eta) reproduces eta."""
        Q = stationary_path_factory(shallow_params, T=1.0, M=10, depth=8)
        eta = _linear_path()
        back = solve_controlled_ode(phi_from_path(eta, Q, shallow_params), Q, shallow_params)
        np.testing.assert_allclose(back.values, eta.values, atol=1e-12)

    def test_control_cost_matches_rate(self, shallow_params, stationary_path_factory):
        """Test that the control cost of phi(eta) equals I(eta) on the linear example."""
        Q = stationary_path_factory(shallow_params, T=1.0, M=10, depth=8)
        phi = phi_from_path(_linear_path(), Q, shallow_params)
        assert control_cost(phi, Q, shallow_params).total == pytest.approx(LINEAR_RATE, rel=1e-12)

    def test_split_cost_dominates_rate(self, stationary_path_factory):
        """Test that any arrival/departure split costs at least the rate, with equality at a / (a + c)."""
        params = ModelParams(lam=0.5, d=2, depth=4)
        Q = stationary_path_factory(params, T=1.0, M=20, depth=4)
        rng = np.random.default_rng(8)
        phi = Control(1.0, TestHelpers.random_control(rng, 1.0, 20, 4).values)
        best = control_cost(phi, Q, params).total
        for _ in range(5):
            w = rng.uniform(0.0, 1.0, size=5)
            assert split_control_cost(phi, Q, params, w).total >= best * (1.0 - 1e-12)

        q = stationary_profile(params, 4).values
        arrivals = np.zeros(5)
        arrivals[1:] = params.lam * (q[:-1] ** 2 - q[1:] ** 2)
        departures = np.concatenate([[0.0], q[1:] - np.append(q[2:], 0.0)])
        w = np.where(arrivals + departures > 0, arrivals / np.where(arrivals + departures > 0,
                                                                    arrivals + departures, 1.0), 0.5)
        assert split_control_cost(phi, Q, params, w).total == pytest.approx(best, rel=1e-10)

    def test_split_cost_on_empty_set(self):
        """Test that putting control on an empty indicator set is infinite."""
        params = ModelParams(lam=0.5, d=2, depth=3)
        Q = PLPath.constant([1.0, 0.5, 0.0, 0.0], 1.0, 10)
        phi = Control(1.0, PLPath.from_function(lambda t: [0.0, 0.0, 0.1], 1.0, 10, 3).values)
        # level 2 has no departures, so all of phi_2 must ride on arrivals
        assert not split_control_cost(phi, Q, params, np.zeros(4)).finite
        assert split_control_cost(phi, Q, params, np.ones(4)).finite

    def test_split_cost_respects_buffer(self, stationary_path_factory):
        """Test that a buffer empties both sets above K and leaves Q_K as the departure set at K."""
        params = ModelParams(lam=0.5, d=2, buffer=2, depth=6)
        Q = stationary_path_factory(params, T=1.0, M=20, depth=6)
        rng = np.random.default_rng(9)
        values = TestHelpers.random_control(rng, 1.0, 20, 6).values.copy()
        values[:, 3:] = 0.0
        phi = Control(1.0, values)
        best = control_cost(phi, Q, params).total

        q = stationary_profile(params, 6).values
        arrivals = np.zeros(7)
        arrivals[1:3] = params.lam * (q[:2] ** 2 - q[1:3] ** 2)
        departures = np.zeros(7)
        departures[1:3] = [q[1] - q[2], q[2]]
        total = arrivals + departures
        w = np.where(total > 0, arrivals / np.where(total > 0, total, 1.0), 0.5)
        assert split_control_cost(phi, Q, params, w).total == pytest.approx(best, rel=1e-10)

        above = values.copy()
        above[:, 3] = 0.1
        assert not split_control_cost(Control(1.0, above), Q, params, np.full(7, 0.5)).finite


@pytest.mark.unit
class TestOccupancyMeasureRate:
    """Test the rate of occupancy-measure deviations."""

    def test_matches_tail_rate(self, shallow_params, stationary_path_factory):
        """Test that I_mu(differences(eta)) = I(eta)."""
        rng = np.random.default_rng(6)
        Q = stationary_path_factory(shallow_params, T=1.0, M=20, depth=8)
        eta = TestHelpers.random_control(rng, 1.0, 20, 8)
        direct = rate_I(eta, Q, shallow_params, log_callback=_silent).total
        via_mu = rate_I_mu(eta.differences(), Q, shallow_params, log_callback=_silent).total
        assert via_mu == pytest.approx(direct, rel=1e-10)

    def test_mass_violation_is_infinite(self, shallow_params, stationary_path_factory):
        """Test that a deviation that does not conserve mass has infinite rate."""
        Q = stationary_path_factory(shallow_params, T=1.0, M=10, depth=8)
        eta_tilde = PLPath.from_function(lambda t: [0.0, 0.1 * t], 1.0, 10, 8)
        out = rate_I_mu(eta_tilde, Q, shallow_params)
        assert not out.finite
        assert "mass not conserved" in out.reason

    def test_matches_on_family_paths(self):
        """Test I_mu(differences(q)) = I(q) on family A and B paths."""
        params = ModelParams(lam=0.5, d=2, depth=8)
        Q = PLPath.constant(stationary_profile(params, 8), 2.0, 200)
        for kind in ("A", "B"):
            q = family_trajectory(kind, M=200, params=params).physical()
            direct = rate_I(q, Q, params, log_callback=_silent)
            via_mu = rate_I_mu(q.differences(), Q, params, log_callback=_silent)
            assert direct.total > 0.0
            assert via_mu.total == pytest.approx(direct.total, rel=1e-10), kind


@pytest.mark.unit
class TestProfileRate:
    """Test rates around a full-precision constant profile."""

    def test_linear_example(self):
        """Test that the unscaled linear path gives the hand value."""
        out = rate_stationary(_linear_path(), ModelParams(lam=0.5, d=2))
        assert out.total == pytest.approx(LINEAR_RATE, rel=1e-12)
        assert out.truncation == 0.0

    def test_matches_double_rate_where_representable(self):
        """Test agreement with rate_I on a family path whose profile fits in doubles."""
        params = ModelParams(lam=0.5, d=2, depth=8)
        Q = PLPath.constant(stationary_profile(params, 8), 2.0, 200)
        for kind in ("A", "B", "C"):
            q = family_trajectory(kind, M=200, params=params)
            scaled = rate_at_profile(q, stationary_profile_mp(0.5, 2, 8), params, log_callback=_silent)
            direct = rate_I(q.physical(), Q, params, log_callback=_silent)
            np.testing.assert_allclose(scaled.per_coordinate, direct.per_coordinate, rtol=1e-9, atol=0.0)

    def test_deep_coordinates_contribute(self, params):
        """Test that coordinates past the double range of Q* keep their share of I(q)."""
        q = family_trajectory("A", M=200, params=params)
        messages = []
        out = rate_stationary(q, params, log_callback=messages.append)
        for j in (12, 16, 20, 24):
            assert out.per_coordinate[j] == pytest.approx(_family_a_term(j), rel=1e-6)
        assert out.truncation == out.per_coordinate[24]
        assert any("[WARNING] Truncation check failed" in m for m in messages)
        with pytest.raises(NumericalError):
            rate_stationary(q, params, strict=True)

    def test_fast_coefficients_pass_strict_check(self, params):
        """Test that c_j = 4^-j leaves a negligible last term at depth 24."""
        q = family_trajectory("A", coefficients=lambda j: 4.0 ** -j, M=200, params=params)
        out = rate_stationary(q, params, strict=True)
        assert out.finite
        assert out.truncation < 1e-10

    def test_weight_overflow_is_infinite(self):
        """Test that an unscaled control where 1/denom_j leaves the double range is infinite."""
        params = ModelParams(lam=0.5, d=2, depth=14)
        q = PLPath.from_function(lambda t: np.r_[np.zeros(12), 1e-3 * t], 2.0, 20, 14)
        out = rate_stationary(q, params)
        assert not out.finite
        assert "beyond double range" in out.reason

    def test_buffered_profile_k1(self):
        """Test the K = 1 buffered rate straight from the mpmath profile."""
        params = ModelParams(lam=0.5, d=2, buffer=1, depth=6)
        profile = solve_buffered(params, 1).profile_mp
        out = rate_at_profile(_linear_path(depth=6), profile, params)
        phi_sq = 0.01 + 0.01 * np.sqrt(2.0) + 0.02 / 3.0
        assert out.total == pytest.approx(0.5 * phi_sq / (2.0 * (np.sqrt(2.0) - 1.0)), rel=1e-10)
        assert np.all(out.per_coordinate[2:] == 0.0)



@pytest.mark.unit
class TestSerialization:
    """Test JSON forms of paths and breakdowns."""

    def test_path_json_round_trip(self):
        """Test that a path survives JSON encoding."""
        path = _linear_path(M=4, depth=3)
        back = PLPath.from_dict(json.loads(json.dumps(path.to_dict())))
        np.testing.assert_array_equal(back.values, path.values)
        assert back.T == path.T

    def test_path_shape_checked(self):
        """Test that grid_points and coords must match the rows."""
        data = _linear_path(M=4, depth=3).to_dict()
        data["grid_points"] = 7
        with pytest.raises(ShapeError):
            PLPath.from_dict(data)

    def test_infinite_breakdown_round_trip(self):
        """Test that an infinite rate is written as "inf" and read back."""
        out = RateBreakdown.infinite(3, "coordinate 2 blocked")
        data = json.loads(json.dumps(out.to_dict()))
        assert data["total"] == "inf"
        back = RateBreakdown.from_dict(data)
        assert not back.finite and back.reason == "coordinate 2 blocked"


@pytest.mark.slow
@pytest.mark.timeout(300)
class TestRoundTrip:
    """Test control -> path -> rate against the control cost."""

    def test_second_order_agreement(self):
        """Test that |I(eta_phi) - cost(phi)| shrinks at least 3.5x per grid doubling."""
        params = ModelParams(lam=0.5, d=2, depth=3)
        errors = []
        for M in (40, 80, 160):
            rng = np.random.default_rng(13)
            Q = PLPath.constant(stationary_profile(params, 3), 1.0, M)
            phi = Control(1.0, TestHelpers.random_control(rng, 1.0, M, 3, knots=5).values)
            eta = solve_controlled_ode(phi, Q, params)
            rate = rate_I(eta, Q, params, log_callback=_silent).total
            cost = control_cost(phi, Q, params).total
            errors.append(abs(rate - cost))
        assert errors[0] / errors[1] >= 3.5
        assert errors[1] / errors[2] >= 3.5
