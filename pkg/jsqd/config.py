import json
import math
import os
import tempfile
import threading
from pathlib import Path

from jsqd.error_handling import ConfigError

# ============================================================================
# Config Singleton - Global Configuration Class
# ============================================================================

class Config:
    """
    Singleton configuration class - ALL default parameters are read through this class.

    Usage:
        # Load a project file at startup
        Config.instance().load("experiments/jsqd_config.json")

        # Access anywhere in the codebase
        depth = Config.instance().get("depth", 24)

        # Save changes
        Config.instance().update({"lambda": 0.7})
        Config.instance().save("experiments/jsqd_config.json")
    """

    # Class constants
    PROJECT_CONFIG_FILE = "jsqd_config.json"
    MAX_CONFIG_BYTES = 1 * 1024 * 1024

    # Default experiment settings
    DEFAULT_CONFIG = {
        "lambda": 0.5,           # arrival rate per server
        "d": 2,                  # number of sampled servers
        "buffer": None,          # K, None = no buffer
        "depth": 24,             # truncation depth J
        "t_max": 10.0,           # horizon T in model time units
        "seed": 0,
        "threads": 0,            # 0 = auto
        "format": "csv",
        "n": 1000,               # number of servers
        "record_step": 0.01,     # trajectory sampling grid
        "fluid_step": 1e-3,      # RK4 step h
        "fluid_tolerance": 1e-8, # step-halving error target
        "grid_points": 2000,     # M for rate-function paths
        "denom_tol": 0.0,        # rate denominators <= this count as zero
        "zero_tol": 1e-12,       # controls with |phi| <= this count as zero
        "gamma": 0.3,            # a(n) = n^-gamma
        "replicas": 100,
        "n_list": [500, 2000, 8000],
        "coordinate": 1,         # deviation event coordinate j
        "delta": 1.0,            # deviation event threshold
        "kmax": 10,
    }

    # =================================================================
    # Input Validation Methods
    # =================================================================

    @staticmethod
    def _validate_lambda(value) -> float:
        """Validate the per-server arrival rate (lambda >= 0; zero allowed for drain runs)."""
        try:
            lam = float(value)
        except (ValueError, TypeError):
            raise ValueError(f"lambda must be a number, got: {value} ({type(value)})")
        if not math.isfinite(lam) or lam < 0:
            raise ValueError(f"lambda must be a finite non-negative number, got: {lam}")
        return lam

    @staticmethod
    def _validate_choices(value) -> int:
        """Validate the number of sampled servers d."""
        try:
            d = int(value)
        except (ValueError, TypeError):
            raise ValueError(f"d must be an integer, got: {value} ({type(value)})")
        if d != float(value):
            raise ValueError(f"d must be an integer, got: {value}")
        if d < 1:
            raise ValueError(f"d must be >= 1, got: {d}")
        return d

    @staticmethod
    def _validate_buffer(value):
        """Validate the buffer size K (None disables the buffer)."""
        if value is None:
            return None
        try:
            k = int(value)
        except (ValueError, TypeError):
            raise ValueError(f"buffer must be a positive integer, got: {value} ({type(value)})")
        if k < 1:
            raise ValueError(f"buffer must be >= 1, got: {k}")
        return k

    @staticmethod
    def _validate_depth(value) -> int:
        """Validate the truncation depth J."""
        try:
            depth = int(value)
        except (ValueError, TypeError):
            raise ValueError(f"depth must be an integer, got: {value} ({type(value)})")
        if depth < 1:
            raise ValueError(f"depth must be >= 1, got: {depth}")
        if depth > 4096:
            raise ValueError(f"depth too large (max 4096), got: {depth}")
        return depth

    @staticmethod
    def _validate_positive(value, param_name: str) -> float:
        """Validate a strictly positive finite real (horizons, steps, tolerances)."""
        try:
            x = float(value)
        except (ValueError, TypeError):
            raise ValueError(f"{param_name} must be a number, got: {value} ({type(value)})")
        if not math.isfinite(x) or x <= 0:
            raise ValueError(f"{param_name} must be positive, got: {x}")
        return x

    @staticmethod
    def _validate_non_negative(value, param_name: str) -> float:
        try:
            x = float(value)
        except (ValueError, TypeError):
            raise ValueError(f"{param_name} must be a number, got: {value} ({type(value)})")
        if not math.isfinite(x) or x < 0:
            raise ValueError(f"{param_name} must be non-negative, got: {x}")
        return x

    @staticmethod
    def _validate_count(value, param_name: str, minimum: int = 1) -> int:
        try:
            k = int(value)
        except (ValueError, TypeError):
            raise ValueError(f"{param_name} must be an integer, got: {value} ({type(value)})")
        if k < minimum:
            raise ValueError(f"{param_name} must be >= {minimum}, got: {k}")
        return k

    @staticmethod
    def _validate_gamma(value) -> float:
        """Validate the moderate-deviation exponent, a(n) = n^-gamma."""
        try:
            gamma = float(value)
        except (ValueError, TypeError):
            raise ValueError(f"gamma must be a number, got: {value} ({type(value)})")
        if not (0.0 < gamma < 0.5):
            raise ValueError(f"gamma must lie in (0, 0.5), got: {gamma}")
        return gamma

    @staticmethod
    def _validate_seed(value) -> int:
        """Validate a 64-bit unsigned seed."""
        try:
            seed = int(value)
        except (ValueError, TypeError):
            raise ValueError(f"seed must be an integer, got: {value} ({type(value)})")
        if seed < 0 or seed >= 2 ** 64:
            raise ValueError(f"seed must lie in [0, 2^64), got: {seed}")
        return seed

    @staticmethod
    def _validate_format(value) -> str:
        fmt = str(value).lower()
        if fmt not in ("csv", "json"):
            raise ValueError(f"format must be csv or json, got: {value}")
        return fmt

    @staticmethod
    def _validate_n_list(value) -> list:
        if not isinstance(value, (list, tuple)) or not value:
            raise ValueError(f"n_list must be a non-empty list of server counts, got: {value}")
        try:
            ns = [int(v) for v in value]
        except (ValueError, TypeError):
            raise ValueError(f"n_list entries must be integers, got: {value}")
        if any(n < 1 for n in ns):
            raise ValueError(f"n_list entries must be >= 1, got: {ns}")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError(f"n_list must be strictly increasing, got: {ns}")
        return ns

    def _validate_config_dict(self, config: dict) -> dict:
        """Validate all parameters in a configuration dictionary.

        Args:
            config: Configuration dictionary to validate

        Returns:
            Validated configuration dictionary

        Raises:
            ValueError: If any parameter is invalid
        """
        validated = config.copy()

        if "lambda" in validated:
            validated["lambda"] = self._validate_lambda(validated["lambda"])
        if "d" in validated:
            validated["d"] = self._validate_choices(validated["d"])
        if "buffer" in validated:
            validated["buffer"] = self._validate_buffer(validated["buffer"])
        if "depth" in validated:
            validated["depth"] = self._validate_depth(validated["depth"])
        for param in ["t_max", "record_step", "fluid_step", "fluid_tolerance", "delta"]:
            if param in validated:
                validated[param] = self._validate_positive(validated[param], param)
        for param in ["denom_tol", "zero_tol"]:
            if param in validated:
                validated[param] = self._validate_non_negative(validated[param], param)
        for param, minimum in [("n", 1), ("grid_points", 1), ("replicas", 1),
                               ("coordinate", 1), ("kmax", 2), ("threads", 0)]:
            if param in validated:
                validated[param] = self._validate_count(validated[param], param, minimum)
        if "gamma" in validated:
            validated["gamma"] = self._validate_gamma(validated["gamma"])
        if "seed" in validated:
            validated["seed"] = self._validate_seed(validated["seed"])
        if "format" in validated:
            validated["format"] = self._validate_format(validated["format"])
        if "n_list" in validated:
            validated["n_list"] = self._validate_n_list(validated["n_list"])

        # Cross-field: buffered runs need room for q_{K+1} = 0 in the truncation
        buffer = validated.get("buffer")
        if buffer is not None and "depth" in validated and validated["depth"] < buffer + 2:
            raise ValueError(f"depth must be >= buffer + 2 ({buffer + 2}), got: {validated['depth']}")

        return validated

    # =================================================================
    # Singleton Implementation
    # =================================================================

    _instance = None
    _lock = threading.Lock()

    def __init__(self):
        if Config._instance is not None:
            raise RuntimeError("Use Config.instance() instead of creating new instances")
        self._config = None

    @classmethod
    def instance(cls):
        """Get the singleton instance (thread-safe)."""
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = cls()
        return cls._instance

    # =================================================================
    # Configuration Methods
    # =================================================================

    def set(self, config: dict):
        """Set the current configuration dictionary with validation."""
        if config is None:
            self._config = None
            return

        try:
            validated_config = self._validate_config_dict(config)
            self._config = validated_config.copy()
        except ValueError as e:
            print(f"[Config] WARNING: Invalid configuration parameter: {e}")
            print(f"[Config] Using defaults for invalid parameters")
            self._config = self.DEFAULT_CONFIG.copy()
            for key, value in config.items():
                try:
                    validated_test = self._validate_config_dict({key: value})
                    self._config[key] = validated_test[key]
                except ValueError:
                    # Skip invalid parameter, keep default
                    pass

    def get_all(self) -> dict:
        """Get the entire configuration dictionary (defaults when nothing is set)."""
        return self._config.copy() if self._config else self.DEFAULT_CONFIG.copy()

    def get(self, key: str, default=None):
        """Get a configuration value by key, falling back to DEFAULT_CONFIG."""
        if self._config is None:
            return self.DEFAULT_CONFIG.get(key, default)
        return self._config.get(key, self.DEFAULT_CONFIG.get(key, default))

    def update(self, updates: dict):
        """Update configuration with new values, with validation."""
        if self._config is None:
            self._config = self.DEFAULT_CONFIG.copy()

        try:
            temp_config = self._config.copy()
            temp_config.update(updates)
            validated = self._validate_config_dict(temp_config)
            self._config = validated
        except ValueError as e:
            print(f"[Config] WARNING: Invalid configuration update: {e}")
            print(f"[Config] Applying only valid parameters")
            for key, value in updates.items():
                try:
                    temp_config = self._config.copy()
                    temp_config[key] = value
                    self._config = self._validate_config_dict(temp_config)
                except ValueError as param_error:
                    print(f"[Config] Skipping invalid parameter {key}: {param_error}")

    def clear(self):
        """Clear the configuration (mainly for testing)."""
        self._config = None

    # =================================================================
    # Disk I/O Methods
    # =================================================================

    def _read_json(self, config_path: Path) -> dict:
        size = config_path.stat().st_size
        if size > self.MAX_CONFIG_BYTES:
            raise OSError(f"Config file too large ({size} bytes, max {self.MAX_CONFIG_BYTES} bytes)")
        with open(config_path, "r") as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ValueError(f"Config file must hold a JSON object, got {type(data).__name__}")
        return data

    def load(self, config_file: str = None) -> dict:
        """
        Load a project config from disk and set it as the current config.
        Invalid or unknown values are reported and the defaults kept.
        """
        config = self.DEFAULT_CONFIG.copy()
        config_path = Path(config_file or self.PROJECT_CONFIG_FILE).expanduser().resolve()

        if config_path.exists():
            try:
                user_config = self._read_json(config_path)
                for key, value in user_config.items():
                    if key not in config:
                        print(f"[Config] WARNING: Ignoring unknown config key {key}")
                        continue
                    try:
                        config[key] = self._validate_config_dict({key: value})[key]
                    except ValueError as e:
                        print(f"[Config] WARNING: Ignoring invalid config value {key}={value}: {e}")
            except (json.JSONDecodeError, OSError, ValueError) as e:
                print(f"[Config] WARNING: Failed to load from {config_path} ({e}), using defaults.")

        self.set(config)
        return config

    def load_strict(self, config_file: str) -> dict:
        """Read and validate a config file, raising ConfigError on any problem.

        Returns only the keys present in the file (validated); the caller merges
        them with defaults and flag overrides.
        """
        config_path = Path(config_file).expanduser()
        try:
            user_config = self._read_json(config_path)
        except (json.JSONDecodeError, OSError, ValueError) as e:
            raise ConfigError(f"cannot read config file {config_path}: {e}", flag="--config")
        unknown = sorted(set(user_config) - set(self.DEFAULT_CONFIG))
        if unknown:
            raise ConfigError(f"unknown keys in {config_path}: {', '.join(unknown)}", flag="--config")
        validated = {}
        for key, value in user_config.items():
            try:
                validated[key] = self._validate_config_dict({key: value})[key]
            except ValueError as e:
                raise ConfigError(f"{config_path}: {e}", flag=f"--{key.replace('_', '-')}")
        return validated

    def save(self, config_file: str):
        """Save the current configuration (merged with defaults) atomically."""
        if not config_file:
            print("[Config] WARNING: No config file specified, cannot save config")
            return

        merged = self.DEFAULT_CONFIG.copy()
        if self._config:
            merged.update(self._config)

        config_path = Path(config_file).expanduser().resolve()
        try:
            config_path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp_name = tempfile.mkstemp(dir=config_path.parent, suffix=".tmp")
            with os.fdopen(fd, "w") as f:
                json.dump(merged, f, indent=2)
            os.replace(tmp_name, config_path)
        except OSError as e:
            print(f"[Config] WARNING: Failed to save to {config_path} ({e})")


# Expose class constants as module-level for convenience
DEFAULT_CONFIG = Config.DEFAULT_CONFIG
PROJECT_CONFIG_FILE = Config.PROJECT_CONFIG_FILE


# ============================================================================
# Module-level convenience: Shorthand for Config.instance()
# ============================================================================
# Usage: from jsqd.config import cfg
#        depth = cfg.get("depth")
cfg = Config.instance()
