"""
Unit tests for jsqd.occupancy: state types, routing combinatorics and drifts.
"""

from fractions import Fraction

import numpy as np
import pytest

from jsqd.error_handling import DomainError, InvalidMeasureError, InvalidStateError, ShapeError
from jsqd.occupancy.combinatorics import (
    binom_ratio,
    finite_correction_constant,
    monotone_ratio,
    routing_rate_finite,
    routing_rates_finite,
    routing_rates_float,
)
from jsqd.occupancy.drift import (
    drift_finite,
    drift_limit,
    linearized_drift,
    taylor_remainder,
    taylor_remainder_quadratic,
)
from jsqd.occupancy.vectors import FiniteQVector, ModelParams, MuVector, QVector, lambda0, mu_to_q, q_to_mu
from tests.conftest import TestHelpers


@pytest.mark.unit
class TestModelParams:
    """Test parameter validation."""

    def test_defaults(self):
        """Test that the default model is lambda = 0.5, d = 2, unbuffered."""
        p = ModelParams()
        assert (p.lam, p.d, p.buffer, p.depth) == (0.5, 2, None, 24)
        assert not p.buffered

    def test_rejects_bad_values(self):
        """Test that negative lambda, d < 1 and shallow buffered depth are rejected."""
        with pytest.raises(DomainError):
            ModelParams(lam=-1.0)
        with pytest.raises(DomainError):
            ModelParams(d=0)
        with pytest.raises(DomainError, match="buffer \\+ 2"):
            ModelParams(buffer=5, depth=6)

    def test_with_buffer_raises_depth(self):
        """Test that with_buffer deepens the truncation to at least K + 2."""
        p = ModelParams(depth=4).with_buffer(6)
        assert p.buffer == 6 and p.depth == 8
        assert p.unbuffered().buffer is None

    def test_dict_round_trip(self):
        """Test that to_dict/from_dict preserve the parameters."""
        p = ModelParams(lam=0.3, d=3, buffer=2, depth=6)
        assert ModelParams.from_dict(p.to_dict()) == p

    def test_lambda0(self):
        """Test that lambda_0 = max(lambda, 1)."""
        assert lambda0(ModelParams(lam=0.5)) == 1.0
        assert lambda0(ModelParams(lam=1.5)) == 1.5


@pytest.mark.unit
class TestVectors:
    """Test QVector, MuVector and FiniteQVector invariants."""

    def test_qvector_invariants(self):
        """Test that q_0 = 1, bounds and monotonicity are enforced."""
        QVector([1.0, 0.5, 0.1])
        with pytest.raises(InvalidStateError, match="q_0 == 1"):
            QVector([0.9, 0.5])
        with pytest.raises(InvalidStateError, match="nonincreasing"):
            QVector([1.0, 0.2, 0.3])
        with pytest.raises(InvalidStateError):
            QVector([1.0, -0.1])

    def test_qvector_is_read_only(self):
        """Test that stored values cannot be mutated."""
        q = QVector([1.0, 0.5, 0.1])
        with pytest.raises(ValueError):
            q.values[1] = 0.2

    def test_projected_repairs_round_off(self):
        """Test that projection clips and restores monotonicity."""
        q = QVector.projected([1.0000000001, 0.5, 0.5000000001, -1e-15])
        assert q.values[0] == 1.0
        assert np.all(np.diff(q.values) <= 0)
        assert q.values[-1] == 0.0

    def test_mu_sum_checked(self):
        """Test that a measure must sum to one."""
        MuVector([0.5, 0.25, 0.25])
        with pytest.raises(InvalidMeasureError):
            MuVector([0.5, 0.25])

    def test_mu_q_conversion(self):
        """Test that mu and q convert into each other."""
        q = QVector([1.0, 0.6, 0.2, 0.05])
        mu = q_to_mu(q)
        np.testing.assert_allclose(mu.values, [0.4, 0.4, 0.15, 0.05])
        np.testing.assert_allclose(mu_to_q(mu).values, q.values)

    def test_finite_vector_from_lengths(self):
        """Test that tail counts follow from queue lengths and back."""
        state = FiniteQVector.from_lengths([0, 2, 1, 2], depth=4)
        assert state.counts.tolist() == [4, 3, 2, 0, 0]
        assert sorted(state.to_lengths().tolist()) == [0, 1, 2, 2]
        assert state.count(9) == 0

    def test_finite_vector_constructors(self):
        """Test the empty and all-length constructors."""
        assert FiniteQVector.empty(5, 3).counts.tolist() == [5, 0, 0, 0]
        assert FiniteQVector.all_length(5, 2, 3).counts.tolist() == [5, 5, 5, 0]
        with pytest.raises(InvalidStateError):
            FiniteQVector(np.array([4, 5, 0]), 4)

    def test_round_from_is_close(self):
        """Test that largest-remainder rounding stays within J/n of the profile."""
        q = QVector([1.0, 0.5, 0.125, 0.0078125, 0.0])
        for n in (7, 100, 1001):
            state = FiniteQVector.round_from(q, n)
            assert state.counts[0] == n
            assert np.max(np.abs(state.counts / n - q.values)) <= q.depth / n


@pytest.mark.unit
class TestCombinatorics:
    """Test the exact routing probabilities."""

    def test_binom_ratio(self):
        """Test binom(m, d) / binom(n, d) on small cases."""
        assert binom_ratio(3, 5, 2) == Fraction(3, 10)
        assert binom_ratio(1, 5, 2) == 0
        with pytest.raises(DomainError):
            binom_ratio(1, 1, 2)

    def test_routing_rates_sum_to_one(self):
        """Test that R^n_1..R^n_{J+1} sum to exactly one."""
        rng = np.random.default_rng(3)
        for d in (1, 2, 3):
            params = ModelParams(d=d, depth=5)
            for _ in range(20):
                state = TestHelpers.random_state(rng, 6, 4, 5)
                assert sum(routing_rates_finite(state, params)) == 1

    def test_routing_level_zero_rejected(self):
        """Test that level 0 has no routing rate."""
        state = FiniteQVector.empty(3, 2)
        with pytest.raises(DomainError):
            routing_rate_finite(state, 0, ModelParams())

    def test_float_rates_match_exact(self):
        """Test that float routing rates agree with the exact fractions."""
        rng = np.random.default_rng(5)
        params = ModelParams(d=3, depth=6)
        state = TestHelpers.random_state(rng, 9, 5, 6)
        exact = [float(r) for r in routing_rates_finite(state, params)][:6]
        np.testing.assert_allclose(routing_rates_float(state, params)[1:], exact, atol=1e-15)

    def test_correction_constant(self):
        """Test C_n = prod n / (n - k)."""
        assert finite_correction_constant(10, 1) == 1.0
        assert finite_correction_constant(10, 3) == pytest.approx(10 / 9 * 10 / 8)

    @pytest.mark.property
    def test_monotone_ratio_decreasing(self):
        """Test that (x^k - y^k)/(x^d - y^d) decreases in x and in y on random grids."""
        rng = np.random.default_rng(11)
        violations = 0
        for _ in range(100):
            d = int(rng.integers(2, 6))
            k = int(rng.integers(1, d))
            pts = np.sort(rng.uniform(0.0, 1.0, size=(1000, 3)), axis=1)
            for y, x1, x2 in pts:
                if not (y + 1e-4 < x1 < x2):
                    continue
                if monotone_ratio(x1, y, k, d) < monotone_ratio(x2, y, k, d) * (1 - 1e-9):
                    violations += 1
                y2 = 0.5 * (y + x1)
                if monotone_ratio(x1, y, k, d) < monotone_ratio(x1, y2, k, d) * (1 - 1e-9):
                    violations += 1
        assert violations == 0


@pytest.mark.unit
class TestDrift:
    """Test finite and limit drifts."""

    def test_limit_drift_formula(self, params):
        """Test b_i = lambda (q_{i-1}^2 - q_i^2) - (q_i - q_{i+1}) by hand."""
        q = QVector([1.0, 0.6, 0.2, 0.0])
        b = drift_limit(q, ModelParams(lam=0.5, d=2, depth=3))
        np.testing.assert_allclose(b, [0.0, 0.5 * (1 - 0.36) - 0.4, 0.5 * (0.36 - 0.04) - 0.2, 0.5 * 0.04])

    def test_drift_telescopes(self):
        """Test sum_i b_i = lambda - q_1 - lambda q_J^d over random profiles."""
        rng = np.random.default_rng(11)
        for d in (1, 2, 3):
            params = ModelParams(lam=0.7, d=d, depth=6)
            for _ in range(10):
                q = np.r_[1.0, np.sort(rng.uniform(0.0, 1.0, 6))[::-1]]
                b = drift_limit(q, params)
                assert b.sum() == pytest.approx(0.7 - q[1] - 0.7 * q[-1] ** d, abs=1e-14)
                q[-1] = 0.0
                assert drift_limit(q, params).sum() == pytest.approx(0.7 - q[1], abs=1e-14)

    def test_buffered_drift_drops_overflow(self):
        """Test that coordinates above K are frozen and q_{K+1} is dropped at K."""
        q = np.array([1.0, 0.6, 0.2, 0.0, 0.0])
        b = drift_limit(q, ModelParams(lam=0.5, d=2, buffer=2, depth=4))
        assert b[2] == pytest.approx(0.5 * (0.36 - 0.04) - 0.2)
        assert np.all(b[3:] == 0.0)

    def test_finite_drift_exact(self):
        """Test the exact drift of a three-server state against a hand count."""
        state = FiniteQVector.from_lengths([0, 1, 2], depth=3)
        params = ModelParams(lam=1.0, d=2, depth=3)
        b = drift_finite(state, params, exact=True)
        # pairs {0,1},{0,2},{1,2}: joins length 0, 0, 1
        assert b[1] == Fraction(2, 3) - Fraction(2 - 1, 3)
        assert b[2] == Fraction(1, 3) - Fraction(1 - 0, 3)
        assert b[3] == 0 - Fraction(0, 3)
        np.testing.assert_allclose(drift_finite(state, params), [float(x) for x in b])

    def test_finite_drift_rejects_large_d(self):
        """Test that d > n is a domain error."""
        with pytest.raises(DomainError):
            drift_finite(FiniteQVector.empty(2, 3), ModelParams(d=3, depth=3))

    def test_linearization_at_stationary_profile(self, qstar):
        """Test Db(Q*) e_1 = (-1.5, 0.5) at lambda = 0.5, d = 2."""
        params = ModelParams(lam=0.5, d=2, depth=qstar.depth)
        e1 = np.zeros(qstar.depth + 1)
        e1[1] = 1.0
        out = linearized_drift(qstar, e1, params)
        assert out[1] == pytest.approx(-1.5)
        assert out[2] == pytest.approx(0.5)
        assert np.all(out[3:] == 0.0)

    def test_linearization_requires_p0_zero(self, qstar, params):
        """Test that a direction with p_0 != 0 is rejected."""
        p = np.zeros(qstar.depth + 1)
        p[0] = 1.0
        with pytest.raises(DomainError):
            linearized_drift(qstar, p, params)
        with pytest.raises(ShapeError):
            linearized_drift(qstar, np.zeros(3), params)

    def test_taylor_remainder_closed_form(self):
        """Test that the d = 2 remainder equals lambda (Delta_{i-1}^2 - Delta_i^2)."""
        rng = np.random.default_rng(2)
        params = ModelParams(lam=0.7, d=2, depth=6)
        for _ in range(10):
            q = TestHelpers.random_qvector(rng, 6)
            qbar = TestHelpers.random_qvector(rng, 6)
            np.testing.assert_allclose(taylor_remainder(qbar, q, params),
                                       taylor_remainder_quadratic(qbar, q, params), atol=1e-14)
