# jsqd/cli.py
"""
Command-line entry point.

    jsqd simulate   | fluid | stationary | rate | converge-k | mdp  [flags]

Flag values override `--config file.json` values, which override the
defaults in jsqd.config. Exit status: 0 success, 1 domain/numerical error,
2 usage or configuration error.
"""
import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from jsqd.config import DEFAULT_CONFIG, cfg
from jsqd.error_handling import ConfigError, DomainError, ErrorHandler, JsqdError, safe_json_parse
from jsqd.fluid.integrator import FluidOpts, integrate_fluid
from jsqd.fluid.stationary import buffer_gap_report, solve_buffered, stationary_profile
from jsqd.harness.experiments import EVENTS, INITS, MdpConfig, run_lln_experiment, run_mdp_experiment
from jsqd.occupancy.vectors import FiniteQVector, ModelParams, QVector
from jsqd.paths import PLPath
from jsqd.rates.buffered import MODES, rate_buffered, rate_stationary
from jsqd.rates.convergence import convergence_study
from jsqd.rates.families import FAMILIES, family_trajectory
from jsqd.reports import ExperimentReport, dump_artifact, write_artifact
from jsqd.simulation.base_simulator import ALL_EVENTS, SimConfig
from jsqd.simulation.simulator_factory import SimulatorFactory

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2

SUBCOMMANDS = ("simulate", "fluid", "stationary", "rate", "converge-k", "mdp")
# Subcommands working around a stationary profile (lambda < 1 required)
STATIONARY_COMMANDS = ("stationary", "rate", "converge-k")
ENGINES = ("server", "occupancy")

# Flags stored under a config key; validated by Config._validate_config_dict
CONFIG_FLAGS = {
    "lambda": "--lambda", "d": "--d", "buffer": "--buffer", "depth": "--depth", "seed": "--seed",
    "format": "--format", "threads": "--threads", "n": "--n", "t_max": "--t-max",
    "record_step": "--record", "fluid_step": "--step", "fluid_tolerance": "--tolerance",
    "grid_points": "--grid-points", "denom_tol": "--denom-tol", "zero_tol": "--zero-tol",
    "gamma": "--gamma", "replicas": "--replicas", "n_list": "--n-list", "coordinate": "--coordinate",
    "delta": "--delta", "kmax": "--kmax",
}


class _Parser(argparse.ArgumentParser):
    """argparse parser that raises ConfigError instead of exiting on bad input."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


@dataclass
class CliConfig:
    subcommand: str
    values: Dict = field(default_factory=dict)
    options: Dict = field(default_factory=dict)
    out: Optional[Path] = None
    fmt: str = "csv"
    quiet: bool = False

    @property
    def params(self) -> ModelParams:
        v = self.values
        return ModelParams(lam=v["lambda"], d=v["d"], buffer=v["buffer"], depth=v["depth"])

    def option(self, name: str, default=None):
        return self.options.get(name, default)


# =================================================================
# Parsing
# =================================================================

def _record(value: str):
    if value == ALL_EVENTS:
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a spacing or '{ALL_EVENTS}', got: {value}")


def _int_list(value: str) -> List[int]:
    try:
        return [int(x) for x in value.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got: {value}")


def _shared_flags() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    S = argparse.SUPPRESS
    p.add_argument("--lambda", dest="lambda", type=float, default=S,
                   help=f"arrival rate per server, per unit time (default: {DEFAULT_CONFIG['lambda']})")
    p.add_argument("--d", type=int, default=S, help=f"servers sampled per arrival (default: {DEFAULT_CONFIG['d']})")
    p.add_argument("--buffer", type=int, default=S, help="buffer size K, maximum queue length (default: none)")
    p.add_argument("--depth", type=int, default=S,
                   help=f"truncation depth J, number of tail coordinates (default: {DEFAULT_CONFIG['depth']})")
    p.add_argument("--seed", type=int, default=S, help=f"master RNG seed (default: {DEFAULT_CONFIG['seed']})")
    p.add_argument("--out", type=Path, default=S, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=S,
                   help=f"output format (default: {DEFAULT_CONFIG['format']})")
    p.add_argument("--threads", type=int, default=S, help="worker threads, 0 = one per CPU (default: 0)")
    p.add_argument("--config", type=Path, default=S, help="JSON file with parameter values (flags win)")
    p.add_argument("--quiet", action="store_true", default=S, help="suppress the per-stage log on stderr")
    return p


def _t_max(p):
    p.add_argument("--t-max", dest="t_max", type=float, default=argparse.SUPPRESS,
                   help=f"horizon T in model time units (default: {DEFAULT_CONFIG['t_max']})")


def _record_flag(p):
    p.add_argument("--record", dest="record_step", type=_record, default=argparse.SUPPRESS,
                   help=f"recording spacing in model time units, or '{ALL_EVENTS}' "
                        f"(default: {DEFAULT_CONFIG['record_step']})")


def _path_source(p):
    group = p.add_mutually_exclusive_group()
    group.add_argument("--path", type=Path, default=argparse.SUPPRESS, help="PLPath JSON file")
    group.add_argument("--family", choices=FAMILIES, type=str.upper, default=argparse.SUPPRESS,
                       help="test trajectory family on [0, 2]")
    p.add_argument("--coeff-power", dest="coeff_power", type=float, default=argparse.SUPPRESS,
                   help="family coefficients c_j = j^-p (default: 1)")
    p.add_argument("--grid-points", dest="grid_points", type=int, default=argparse.SUPPRESS,
                   help=f"time grid subintervals M for family paths (default: {DEFAULT_CONFIG['grid_points']})")


def build_parser(version: str = "dev") -> argparse.ArgumentParser:
    shared = _shared_flags()
    S = argparse.SUPPRESS
    parser = _Parser(prog="jsqd", description="JSQ(d) simulation, fluid limits and moderate-deviation rates")
    parser.add_argument("--version", action="version", version=f"%(prog)s {version}")
    sub = parser.add_subparsers(dest="subcommand", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", parents=[shared], help="simulate the n-server system")
    p.add_argument("--n", type=int, default=S, help=f"number of servers (default: {DEFAULT_CONFIG['n']})")
    _t_max(p)
    _record_flag(p)
    p.add_argument("--engine", choices=ENGINES, default=S, help="simulation engine (default: occupancy)")
    p.add_argument("--init", choices=INITS, default=S, help="initial state (default: empty)")
    p.add_argument("--replica", type=int, default=S, help="replica index of the RNG stream (default: 0)")

    p = sub.add_parser("fluid", parents=[shared], help="integrate the fluid ODE")
    _t_max(p)
    _record_flag(p)
    p.add_argument("--init", choices=INITS, default=S, help="initial profile (default: empty)")
    p.add_argument("--step", dest="fluid_step", type=float, default=S,
                   help=f"RK4 step in model time units (default: {DEFAULT_CONFIG['fluid_step']})")
    p.add_argument("--tolerance", dest="fluid_tolerance", type=float, default=S,
                   help=f"step-halving error tolerance (default: {DEFAULT_CONFIG['fluid_tolerance']})")

    p = sub.add_parser("stationary", parents=[shared], help="stationary profiles and buffer gap table")
    p.add_argument("--kmin", type=int, default=S, help="smallest buffer K in the gap table (default: 2)")
    p.add_argument("--kmax", type=int, default=S,
                   help=f"largest buffer K in the gap table (default: {DEFAULT_CONFIG['kmax']})")

    p = sub.add_parser("rate", parents=[shared], help="rate function of a path around Q*")
    _path_source(p)
    p.add_argument("--mode", choices=MODES, default=S,
                   help="with --buffer: profile Q*(K) (buffered) or Q* (truncated) (default: buffered)")
    p.add_argument("--denom-tol", dest="denom_tol", type=float, default=S,
                   help=f"denominators at or below this count as zero (default: {DEFAULT_CONFIG['denom_tol']})")
    p.add_argument("--zero-tol", dest="zero_tol", type=float, default=S,
                   help=f"controls at or below this count as zero (default: {DEFAULT_CONFIG['zero_tol']})")
    p.add_argument("--strict-depth", dest="strict_depth", action="store_true", default=S,
                   help="fail instead of warning when the deepest coordinate still contributes >= 1e-10")

    p = sub.add_parser("converge-k", parents=[shared], help="buffered rates as K grows")
    _path_source(p)
    p.add_argument("--kmin", type=int, default=S, help="smallest K (default: 2)")
    p.add_argument("--kmax", type=int, default=S, help=f"largest K (default: {DEFAULT_CONFIG['kmax']})")

    p = sub.add_parser("mdp", parents=[shared], help="Monte Carlo LLN / moderate-deviation experiment")
    p.add_argument("--experiment", choices=("mdp", "lln"), default=S, help="experiment kind (default: mdp)")
    p.add_argument("--n-list", dest="n_list", type=_int_list, default=S,
                   help=f"comma-separated increasing server counts "
                        f"(default: {','.join(str(n) for n in DEFAULT_CONFIG['n_list'])})")
    p.add_argument("--gamma", type=float, default=S,
                   help=f"exponent in a(n) = n^-gamma, in (0, 0.5) (default: {DEFAULT_CONFIG['gamma']})")
    p.add_argument("--replicas", type=int, default=S,
                   help=f"replicas per n, at least 100 (default: {DEFAULT_CONFIG['replicas']})")
    p.add_argument("--coordinate", type=int, default=S,
                   help=f"tail coordinate j of the event (default: {DEFAULT_CONFIG['coordinate']})")
    p.add_argument("--delta", type=float, default=S,
                   help=f"event threshold on a(n) sqrt(n) |Q^n_j - Q_j| (default: {DEFAULT_CONFIG['delta']})")
    p.add_argument("--event", choices=EVENTS, default=S, help="sup over time or terminal value (default: sup)")
    _t_max(p)
    _record_flag(p)
    p.add_argument("--engine", choices=ENGINES, default=S, help="simulation engine (default: occupancy)")
    p.add_argument("--init", choices=INITS, default=S, help="initial profile (default: empty)")
    return parser


def _validated(values: dict) -> dict:
    """Run the config validators one key at a time so errors name their flag."""
    out = {}
    for key, value in values.items():
        try:
            out[key] = cfg._validate_config_dict({key: value})[key]
        except ValueError as e:
            raise ConfigError(str(e), flag=CONFIG_FLAGS.get(key, f"--{key}"))
    return out


def parse_args(argv: List[str], version: str = "dev") -> CliConfig:
    """Parse and validate a command line; raises ConfigError naming the offending flag."""
    ns = vars(build_parser(version).parse_args(argv))
    subcommand = ns.pop("subcommand")

    values = dict(DEFAULT_CONFIG)
    config_file = ns.pop("config", None)
    file_values = cfg.load_strict(config_file) if config_file is not None else {}
    values.update(file_values)

    flag_values = {k: ns.pop(k) for k in list(ns) if k in DEFAULT_CONFIG}
    record = flag_values.get("record_step")
    if record == ALL_EVENTS:
        if subcommand != "simulate":
            raise ConfigError(f"'{ALL_EVENTS}' recording is only available for simulate", flag="--record")
        ns["record_all_events"] = True
        del flag_values["record_step"]
    values.update(_validated(flag_values))

    buffer = values.get("buffer")
    if buffer is not None and values["depth"] < buffer + 2:
        if "depth" in flag_values or "depth" in file_values:
            raise ConfigError(f"depth must be >= buffer + 2 ({buffer + 2}), got: {values['depth']}", flag="--depth")
        values["depth"] = buffer + 2

    if subcommand in STATIONARY_COMMANDS and not values["lambda"] < 1.0:
        raise ConfigError(f"lambda must be < 1 for stationary-profile rates, got: {values['lambda']}",
                          flag="--lambda")
    if subcommand == "simulate" and values["d"] > values["n"]:
        raise ConfigError(f"d={values['d']} exceeds the number of servers n={values['n']}", flag="--d")
    if subcommand in ("rate", "converge-k") and "path" not in ns and "family" not in ns:
        raise ConfigError(f"{subcommand} needs --path or --family", flag="--path")
    if "kmin" in ns and ns["kmin"] < 1:
        raise ConfigError(f"kmin must be >= 1, got: {ns['kmin']}", flag="--kmin")
    if "kmin" in ns and ns["kmin"] > values["kmax"]:
        raise ConfigError(f"kmin={ns['kmin']} exceeds kmax={values['kmax']}", flag="--kmin")

    out = ns.pop("out", None)
    quiet = bool(ns.pop("quiet", False))
    return CliConfig(subcommand=subcommand, values=values, options=ns, out=out,
                     fmt=values["format"], quiet=quiet)


# =================================================================
# Dispatch
# =================================================================

def _logger(config: CliConfig) -> Callable[[str], None]:
    if config.quiet:
        return lambda msg: None
    return lambda msg: print(msg, file=sys.stderr)


def _emit(config: CliConfig, obj, log: Callable, json_payload: Optional[dict] = None):
    if config.out is None:
        dump_artifact(obj, sys.stdout, config.fmt, json_payload)
        return
    path = write_artifact(obj, config.out, config.fmt, json_payload)
    log(f"[CLI] wrote {path}")


def _initial_profile(config: CliConfig, params: ModelParams) -> QVector:
    if config.option("init", "empty") == "stationary":
        if params.buffered:
            return QVector(solve_buffered(params).profile.padded(params.depth))
        return stationary_profile(params, params.depth)
    values = np.zeros(params.depth + 1)
    values[0] = 1.0
    return QVector(values)


def _load_path(path: Path, log: Callable) -> PLPath:
    text = ErrorHandler.handle_file_operation(lambda p: p.read_text(), Path(path), log)
    if text is None:
        raise ConfigError(f"cannot read path file {path}", flag="--path")
    data = safe_json_parse(text, log, str(path))
    if not isinstance(data, dict):
        raise ConfigError(f"path file {path} does not hold a PLPath JSON object", flag="--path")
    try:
        return PLPath.from_dict(data)
    except (KeyError, TypeError) as e:
        raise ConfigError(f"path file {path} is missing or mistyping a field: {e}", flag="--path")


def _target_path(config: CliConfig, log: Callable) -> PLPath:
    if config.option("path") is not None:
        return _load_path(config.option("path"), log)
    power = config.option("coeff_power", 1.0)
    params = config.params.unbuffered()
    return family_trajectory(config.option("family"), lambda j: j ** -power, params=params,
                             M=config.values["grid_points"])


def _run_simulate(config: CliConfig, log: Callable):
    params = config.params
    n = config.values["n"]
    init = None
    if config.option("init", "empty") == "stationary":
        init = FiniteQVector.round_from(_initial_profile(config, params), n, params.depth)
    record = ALL_EVENTS if config.option("record_all_events") else config.values["record_step"]
    sim = SimConfig(n=n, params=params, horizon=config.values["t_max"], init=init,
                    seed=config.values["seed"], record=record, replica=config.option("replica", 0))
    engine = config.option("engine", "occupancy")
    log(f"[CLI] simulate: {engine} engine, n={n}, lambda={params.lam}, d={params.d}, T={sim.horizon}")
    traj = SimulatorFactory.create(engine, sim, log_callback=log).run()
    log(f"[CLI] events: {traj.event_counts()}")
    _emit(config, traj, log)


def _run_fluid(config: CliConfig, log: Callable):
    params = config.params
    q0 = _initial_profile(config, params)
    opts = FluidOpts.from_config(params, step=config.values["fluid_step"],
                                 tolerance=config.values["fluid_tolerance"],
                                 record_step=config.values["record_step"])
    log(f"[CLI] fluid: lambda={params.lam}, d={params.d}, T={config.values['t_max']}")
    path = integrate_fluid(q0, params, opts, config.values["t_max"], log_callback=log)
    _emit(config, path, log)


def _run_stationary(config: CliConfig, log: Callable):
    params = config.params
    K = params.buffer
    K_range = range(1, K + 1) if K is not None else range(config.option("kmin", 2), config.values["kmax"] + 1)
    log(f"[CLI] stationary: lambda={params.lam}, d={params.d}, K in {K_range.start}..{K_range.stop - 1}")
    report = buffer_gap_report(params, K_range, log_callback=log)
    if K is not None:
        print(f"Q*_1({K}) = {report.buffered_profile.values[1]:.17g}")
    _emit(config, report, log)


def _run_rate(config: CliConfig, log: Callable):
    q = _target_path(config, log)
    params = config.params
    tols = dict(denom_tol=config.values["denom_tol"], zero_tol=config.values["zero_tol"])
    if params.buffered:
        mode = config.option("mode", "buffered")
        breakdown = rate_buffered(q, params.buffer, params, mode=mode, log_callback=log, **tols)
        log(f"[CLI] rate ({mode}, K={params.buffer}): {breakdown.total:.17g}")
    else:
        breakdown = rate_stationary(q, params, log_callback=log,
                                    strict=bool(config.option("strict_depth", False)), **tols)
        log(f"[CLI] rate: {breakdown.total:.17g}")
    if breakdown.reason:
        log(f"[CLI] infinite rate: {breakdown.reason}")
    table = ExperimentReport(name="rate", columns=["j", "contribution"],
                             rows=[{"j": j, "contribution": float(c)}
                                   for j, c in enumerate(breakdown.per_coordinate) if j >= 1])
    _emit(config, table, log, json_payload=breakdown.to_dict())


def _run_converge(config: CliConfig, log: Callable):
    q = _target_path(config, log)
    report = convergence_study(q, config.values["kmax"], config.params.unbuffered(),
                               K_min=config.option("kmin", 2), log_callback=log)
    log(f"[CLI] converge-k: gap tracks criterion = {report.meta['gap_tracks_criterion']}")
    _emit(config, report, log)


def _run_mdp(config: CliConfig, log: Callable):
    v = config.values
    mdp = MdpConfig.from_config(config.params, n_list=tuple(v["n_list"]), gamma=v["gamma"],
                                replicas=v["replicas"], coordinate=v["coordinate"], delta=v["delta"],
                                horizon=v["t_max"], seed=v["seed"], threads=v["threads"],
                                record_step=v["record_step"], event=config.option("event", "sup"),
                                engine=config.option("engine", "occupancy"),
                                init=config.option("init", "empty"))
    experiment = config.option("experiment", "mdp")
    log(f"[CLI] {experiment}: n in {list(mdp.n_list)}, {mdp.replicas} replicas each")
    runner = run_lln_experiment if experiment == "lln" else run_mdp_experiment
    _emit(config, runner(mdp, log_callback=log), log)


HANDLERS = {
    "simulate": _run_simulate,
    "fluid": _run_fluid,
    "stationary": _run_stationary,
    "rate": _run_rate,
    "converge-k": _run_converge,
    "mdp": _run_mdp,
}


def dispatch(config: CliConfig) -> int:
    """Run one subcommand; returns the process exit status."""
    log = _logger(config)
    cfg.set(dict(config.values))
    try:
        HANDLERS[config.subcommand](config, log)
    except ConfigError as e:
        ErrorHandler.log_error(log, config.subcommand, e, e.flag or "")
        return EXIT_USAGE
    except DomainError as e:
        ErrorHandler.log_error(log, config.subcommand, e)
        return EXIT_DOMAIN
    except OSError as e:
        ErrorHandler.log_error(log, f"writing {config.out}" if config.out else config.subcommand, e)
        return EXIT_DOMAIN
    except JsqdError as e:
        ErrorHandler.log_error(log, config.subcommand, e)
        return EXIT_DOMAIN
    return EXIT_OK


def main(argv: Optional[List[str]] = None, version: str = "dev") -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_args(argv, version)
    except ConfigError as e:
        flag = f" ({e.flag})" if e.flag else ""
        print(f"[CLI] usage error{flag}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help / --version
        return int(e.code or 0)
    return dispatch(config)
