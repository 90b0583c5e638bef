"""
Test fixtures and utilities for jsqd tests.

This module provides common fixtures, utilities, and test data
that can be used across multiple test files.
"""

import sys
import tempfile
import shutil
from pathlib import Path
from typing import Generator

import numpy as np
import pytest

# Add the jsqd package to Python path for testing
sys.path.insert(0, str(Path(__file__).parent.parent))

from jsqd.config import Config
from jsqd.fluid.stationary import stationary_profile
from jsqd.occupancy.vectors import FiniteQVector, ModelParams, QVector
from jsqd.paths import PLPath


@pytest.fixture(scope="session")
def temp_test_dir() -> Generator[Path, None, None]:
    """Create a temporary directory for test files that persists for the session."""
    test_dir = Path(tempfile.mkdtemp(prefix="jsqd_test_"))
    try:
        yield test_dir
    finally:
        if test_dir.exists():
            shutil.rmtree(test_dir)


@pytest.fixture(scope="function")
def temp_output_dir(temp_test_dir, request) -> Generator[Path, None, None]:
    """Create a per-test output directory for artifacts."""
    test_name = request.node.name.replace("[", "_").replace("]", "_")
    out_dir = temp_test_dir / f"out_{test_name}"
    out_dir.mkdir(parents=True, exist_ok=True)
    yield out_dir


@pytest.fixture(scope="function")
def clean_config():
    """Ensure the Config singleton holds no overrides before and after each test."""
    Config.instance().clear()
    yield
    Config.instance().clear()


@pytest.fixture
def params() -> ModelParams:
    """The standard lambda = 0.5, d = 2 model."""
    return ModelParams(lam=0.5, d=2, depth=24)


@pytest.fixture
def shallow_params() -> ModelParams:
    return ModelParams(lam=0.5, d=2, depth=8)


@pytest.fixture
def qstar(params) -> QVector:
    return stationary_profile(params, params.depth)


@pytest.fixture
def stationary_path_factory():
    """Build Q* held constant on a grid: factory(params, T, M, depth)."""
    def _make(params: ModelParams, T: float = 1.0, M: int = 200, depth: int = 8) -> PLPath:
        return PLPath.constant(stationary_profile(params, depth), T, M)
    return _make


@pytest.fixture
def sample_config() -> dict:
    """Provide a sample valid configuration for testing."""
    return {
        "lambda": 0.7,
        "d": 3,
        "buffer": 4,
        "depth": 12,
        "t_max": 5.0,
        "seed": 11,
        "gamma": 0.25,
        "n_list": [100, 400],
    }


@pytest.fixture
def invalid_configs() -> dict:
    """Provide various invalid configurations for testing validation."""
    return {
        "negative_lambda": {"lambda": -0.1},
        "string_lambda": {"lambda": "fast"},
        "zero_d": {"d": 0},
        "fractional_d": {"d": 2.5},
        "zero_buffer": {"buffer": 0},
        "zero_depth": {"depth": 0},
        "negative_horizon": {"t_max": -1.0},
        "gamma_too_large": {"gamma": 0.5},
        "gamma_zero": {"gamma": 0.0},
        "negative_seed": {"seed": -3},
        "bad_format": {"format": "xml"},
        "decreasing_n_list": {"n_list": [200, 100]},
    }


class TestHelpers:
    """Helper utilities for tests."""

    @staticmethod
    def random_state(rng: np.random.Generator, n: int, max_length: int, depth: int) -> FiniteQVector:
        """A random n-server state with lengths in 0..max_length."""
        lengths = rng.integers(0, max_length + 1, size=n)
        return FiniteQVector.from_lengths(lengths, depth)

    @staticmethod
    def random_qvector(rng: np.random.Generator, depth: int) -> QVector:
        """A random nonincreasing profile with q_0 = 1."""
        values = np.sort(rng.random(depth))[::-1]
        return QVector(np.concatenate([[1.0], values]))

    @staticmethod
    def random_control(rng: np.random.Generator, T: float, M: int, depth: int,
                       knots: int = 5, scale: float = 0.05) -> PLPath:
        """Piecewise-linear control with `knots` segments aligned to the M grid (coordinate 0 is 0)."""
        knot_times = np.linspace(0.0, T, knots + 1)
        knot_values = scale * rng.standard_normal((knots + 1, depth + 1))
        knot_values[:, 0] = 0.0
        grid = np.linspace(0.0, T, M + 1)
        values = np.column_stack([np.interp(grid, knot_times, knot_values[:, j]) for j in range(depth + 1)])
        return PLPath(T, values)
