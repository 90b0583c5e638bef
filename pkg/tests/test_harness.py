"""
Tests for the Monte Carlo harness: schedules, Wilson intervals and the LLN/MDP experiments.
"""

import math

import numpy as np
import pytest

from jsqd.error_handling import ConfigError, DomainError
from jsqd.harness import (
    MdpConfig,
    MdpReport,
    an_schedule,
    run_lln_experiment,
    run_mdp_experiment,
    wilson_coverage,
    wilson_interval,
)
from jsqd.occupancy.vectors import ModelParams


def _small_config(**overrides) -> MdpConfig:
    values = dict(n_list=(20, 80), replicas=100, horizon=1.0, record_step=0.1, delta=0.3,
                  params=ModelParams(lam=0.5, d=2, depth=12), seed=3, threads=1)
    values.update(overrides)
    return MdpConfig(**values)


@pytest.mark.unit
class TestSchedule:
    """Test a(n) = n^-gamma."""

    def test_values(self):
        """Test a(10^4) at gamma = 0.3."""
        assert an_schedule(1e4, 0.3) == pytest.approx(0.063096, abs=1e-6)
        assert an_schedule(1, 0.2) == 1.0

    def test_gamma_bounds(self):
        """Test that gamma must lie strictly inside (0, 0.5)."""
        for gamma in (0.0, 0.5, 0.6):
            with pytest.raises(ConfigError) as info:
                an_schedule(100, gamma)
            assert info.value.flag == "--gamma"


@pytest.mark.unit
class TestWilson:
    """Test the Wilson score interval."""

    def test_zero_successes(self):
        """Test the closed form z^2/n / (1 + z^2/n) for the upper end at k = 0."""
        lo, hi = wilson_interval(0, 10)
        z2n = 1.959963984540054 ** 2 / 10
        assert lo == pytest.approx(0.0, abs=1e-15)
        assert hi == pytest.approx(z2n / (1.0 + z2n), rel=1e-9)

    def test_symmetry(self):
        """Test that k and n - k give mirrored intervals."""
        lo, hi = wilson_interval(3, 20)
        lo2, hi2 = wilson_interval(17, 20)
        assert lo == pytest.approx(1.0 - hi2)
        assert hi == pytest.approx(1.0 - lo2)

    def test_rejects_bad_input(self):
        """Test the guards on trials, successes and level."""
        with pytest.raises(DomainError):
            wilson_interval(1, 0)
        with pytest.raises(DomainError):
            wilson_interval(5, 4)
        with pytest.raises(DomainError):
            wilson_interval(1, 4, level=1.0)

    def test_coverage(self):
        """Test that the 95% interval covers p = 0.3 in 92-98% of synthetic samples."""
        assert 0.92 <= wilson_coverage(0.3, 200, reps=1000, seed=1) <= 0.98


@pytest.mark.unit
class TestMdpConfig:
    """Test experiment configuration validation."""

    def test_rejects_bad_values(self):
        """Test the guards with the flags they name."""
        cases = {
            "--replicas": dict(replicas=50),
            "--n-list": dict(n_list=(200, 100)),
            "--coordinate": dict(coordinate=0),
            "--delta": dict(delta=-1.0),
            "--event": dict(event="max"),
            "--gamma": dict(gamma=0.7),
            "--init": dict(init="full"),
        }
        for flag, overrides in cases.items():
            with pytest.raises(ConfigError) as info:
                _small_config(**overrides)
            assert info.value.flag == flag

    def test_from_config(self, clean_config):
        """Test that defaults come from the config singleton."""
        config = MdpConfig.from_config(ModelParams(), replicas=200)
        assert config.replicas == 200
        assert config.gamma == 0.3

    def test_report_rows_sorted(self):
        """Test that MdpReport orders rows by n."""
        report = MdpReport(name="mdp", columns=["n", "p"], rows=[{"n": 80, "p": 0.1}, {"n": 20, "p": 0.4}])
        assert report.column("n").tolist() == [20.0, 80.0]
        assert report.probabilities().tolist() == [0.4, 0.1]


@pytest.mark.unit
class TestExperiments:
    """Test small deterministic experiment runs."""

    def test_delta_zero_always_hits(self):
        """Test that delta = 0 gives p = 1 for every n."""
        report = run_mdp_experiment(_small_config(delta=0.0))
        assert report.probabilities().tolist() == [1.0, 1.0]
        assert report.rows[0]["a2_log_p"] == 0.0

    def test_rare_rows(self):
        """Test that no hits leave p empty and report only the upper bound."""
        report = run_mdp_experiment(_small_config(delta=100.0))
        for row in report.rows:
            assert row["rare"] and row["hits"] == 0
            assert row["p"] is None and row["p_low"] is None and row["a2_log_p"] is None
            assert 0.0 < row["p_high"] < 0.05

    def test_same_result_for_any_thread_count(self):
        """Test that rows do not depend on the number of worker threads."""
        serial = run_mdp_experiment(_small_config(threads=1))
        parallel = run_mdp_experiment(_small_config(threads=4))
        assert serial.rows == parallel.rows

    def test_stationary_start(self):
        """Test a run started from the stationary profile."""
        report = run_lln_experiment(_small_config(init="stationary"))
        assert report.column("n").tolist() == [20.0, 80.0]
        assert np.all(report.column("median_sup_distance") > 0.0)
        assert math.isfinite(report.meta["slope"])


@pytest.mark.slow
class TestTrends:
    """Test the n-trends the experiments are built to show."""

    @pytest.mark.timeout(300)
    def test_lln_rate(self):
        """Test that the median sup distance scales like n^(-1/2)."""
        config = _small_config(n_list=(50, 200, 800), replicas=200, delta=0.3)
        report = run_lln_experiment(config)
        assert report.meta["decreasing"]
        assert -0.65 < report.meta["slope"] < -0.35

    @pytest.mark.timeout(300)
    def test_mdp_probability_decreases(self):
        """Test that P(a(n) sqrt(n) sup |dQ_1| >= delta) falls with n."""
        config = _small_config(n_list=(50, 200, 800), replicas=400, delta=0.3)
        report = run_mdp_experiment(config)
        assert report.meta["p_decreasing"]
        assert np.all(report.probabilities() > 0.0)
