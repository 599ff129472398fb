"""Command line interface: ``shapekit fit|test|simulate|validate``."""

import argparse
import functools
import logging
import os
import sys
from typing import Callable, List, Optional

import pandas as pd

from . import __version__
from .assembly import build_gram
from .config import RunConfig, kernel_from_config, load_config, simulation_config
from .const import EXIT_INPUT, EXIT_OK, EXIT_VALIDATION, FORMAT_VERSION
from .dataio import coordinate_columns, infer_dimension, read_dataset, read_grid, write_json, write_table
from .errors import InputError, ShapekitError
from .estimator import fit
from .inference import run_test
from .multiindex import ActiveSet, MultiIndexSet, parse
from .oracles import run_all
from .simulation import run_experiment

LOG_FORMAT = "%(asctime)s [%(levelname)s]-%(module)s.%(funcName)s: %(message)s"

EPILOG = """exit codes:
  0  success
  1  an oracle failed (validate)
  2  invalid input: data, grid, configuration, arguments or an unwritable output path
  3  solver failure
  4  the plug-in covariance collapsed beyond jitter repair
"""


def _exit_status(func: Callable[..., int]) -> Callable[..., int]:
    """Map shapekit errors raised by a command to its exit code; unreadable or unwritable paths exit with ``EXIT_INPUT``"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs) -> int:
        try:
            return func(*args, **kwargs)
        except ShapekitError as exc:
            logging.error("%s failed: %s", func.__name__, exc)
            print(f"error: {exc}", file=sys.stderr)
            return exc.exit_code
        except OSError as exc:
            logging.error("%s failed: %s", func.__name__, exc)
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT

    return wrapper


def _sidecar(path: str, suffix: str) -> str:
    return os.path.splitext(path)[0] + suffix


def _gram_system(config: RunConfig, data_path: str):
    d = infer_dimension(data_path)
    mset = MultiIndexSet.enumerate(d, config["s"])
    data = read_dataset(data_path, mset, config["weights.preset"])
    active = ActiveSet.from_weights(mset, data.W) if config["active"] == "auto" else ActiveSet.from_labels(mset, config["active"])
    return build_gram(data, kernel_from_config(config), mset, active), mset


def _fit(config: RunConfig, sys_):
    return fit(
        sys_,
        config.require_lambda(),
        path=config["solver.path"],
        rank_tol=config["rank_tol"],
        max_rank=config["max_rank"],
        dense_max_m=config["solver.dense_max_m"],
    )


@_exit_status
def cmd_fit(config_path: Optional[str], data_path: str, out_path: str, overrides=None) -> int:
    """Fit the estimator and write the coefficients and diagnostics as JSON"""
    logging.info("Starting fit on %s", data_path)
    config = load_config(config_path, overrides)
    sys_, _ = _gram_system(config, data_path)
    result = _fit(config, sys_)
    write_json({"format_version": FORMAT_VERSION, "config": config.to_dict(), "fit": result.to_dict()}, out_path)
    logging.info("Completed fit: wrote %s", out_path)
    return EXIT_OK


@_exit_status
def cmd_test(config_path: Optional[str], data_path: str, grid_path: str, out_path: str, overrides=None) -> int:
    """Fit, test the configured derivative on the grid, write the report JSON and the per-point CSV"""
    logging.info("Starting test on %s with grid %s", data_path, grid_path)
    config = load_config(config_path, overrides)
    if config["test.alpha_index"] is None:
        raise InputError("test.alpha_index is required, e.g. 'test.alpha_index = 1' for a first derivative in one dimension")
    sys_, mset = _gram_system(config, data_path)
    alpha = parse(config["test.alpha_index"], mset.d)
    if sum(alpha) > mset.s:
        raise InputError(f"test.alpha_index {config['test.alpha_index']} has order above s={mset.s}")
    grid = read_grid(grid_path, mset.d)
    result = _fit(config, sys_)
    report = run_test(
        sys_,
        result,
        grid,
        alpha,
        direction=config["test.direction"],
        mc_reps=config["test.mc_reps"],
        seed=config["test.seed"],
        levels=config["test.levels"],
        threads=config["threads"],
        jitter=config["omega.jitter"],
        kkt_tol=config["nnls.kkt_tol"],
    )
    fit_summary = {key: value for key, value in result.to_dict().items() if key != "c_hat"}
    write_json({**report.to_dict(), "config": config.to_dict(), "fit": fit_summary}, out_path)
    frame = pd.DataFrame(report.grid, columns=coordinate_columns(mset.d))
    frame["theta_hat"] = report.theta_hat
    frame["c_star"] = report.c_star
    write_table(frame, _sidecar(out_path, ".csv"))
    for level in config["test.levels"]:
        key = f"{level:g}"
        verdict = "reject" if report.decision_at[key] else "do not reject"
        print(f"level {key}: {verdict} (W_N={report.W_N:.6g}, p={report.p_value:.4g})")
    logging.info("Completed test: wrote %s", out_path)
    return EXIT_OK


@_exit_status
def cmd_simulate(config_path: Optional[str], out_path: str, overrides=None, progress: bool = False) -> int:
    """Run the size/power experiment and write the CSV table with a JSON metadata sidecar"""
    logging.info("Starting simulation")
    config = load_config(config_path, overrides)
    cfg = simulation_config(config)
    result = run_experiment(cfg, threads=config["threads"], progress=progress)
    with open(out_path, "w", encoding="utf-8", newline="") as ofh:
        ofh.write(result.to_csv())
    write_json({**result.metadata(), "run_config": config.to_dict()}, _sidecar(out_path, ".meta.json"))
    logging.info("Completed simulation: wrote %s", out_path)
    return EXIT_OK


@_exit_status
def cmd_validate(seed: int = 0, tolerance_scale: float = 1.0) -> int:
    """Run every oracle and print one line per check"""
    logging.info("Starting validation with seed %d", seed)
    outcomes = run_all(seed=seed, tolerance_scale=tolerance_scale)
    for outcome in outcomes:
        print(outcome.line())
    failed = [o.name for o in outcomes if not o.passed]
    if failed:
        logging.error("Validation failed: %s", ", ".join(failed))
        return EXIT_VALIDATION
    logging.info("Completed validation: %d checks passed", len(outcomes))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="dotted key = value configuration file")
    common.add_argument("--seed", type=int, help="overrides test.seed and simulation.seed")
    common.add_argument("--threads", type=int, help="worker threads; results do not depend on it")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    common.add_argument("--progress", action="store_true", help="show a progress bar (simulate)")

    parser = argparse.ArgumentParser(prog="shapekit", description="Fit derivative-weighted mean-variance estimators and test shape constraints.", epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit the estimator", epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--data", required=True, help="data CSV: x1..xd, y, w_<multi-index>")
    p.add_argument("--out", required=True, help="output JSON")

    p = sub.add_parser("test", parents=[common], help="test a shape constraint on a grid", epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--data", required=True, help="data CSV: x1..xd, y, w_<multi-index>")
    p.add_argument("--grid", required=True, help="grid CSV: x1..xd")
    p.add_argument("--out", required=True, help="output JSON; the per-point CSV is written next to it")

    p = sub.add_parser("simulate", parents=[common], help="size/power experiment", epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--out", required=True, help="output CSV; metadata goes to <out>.meta.json")

    p = sub.add_parser("validate", parents=[common], help="run the numerical oracles", epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--tolerance-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    overrides = {"test.seed": args.seed, "simulation.seed": args.seed, "threads": args.threads}
    if args.command == "fit":
        return cmd_fit(args.config, args.data, args.out, overrides)
    if args.command == "test":
        return cmd_test(args.config, args.data, args.grid, args.out, overrides)
    if args.command == "simulate":
        return cmd_simulate(args.config, args.out, overrides, progress=args.progress)
    return cmd_validate(seed=0 if args.seed is None else args.seed, tolerance_scale=args.tolerance_scale)


if __name__ == "__main__":
    sys.exit(main())
