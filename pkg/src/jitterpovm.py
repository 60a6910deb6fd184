#!/usr/bin/env python3
"""
jitterpovm: detection-time densities of jittery ON/OFF single-photon detectors.

Usage:
    python -m src.jitterpovm density      --config data/scenarios/fig2_density.yaml --out fig2.csv
    python -m src.jitterpovm delay        --config data/scenarios/fig3_delay.yaml   --out fig3.csv
    python -m src.jitterpovm herald       --config data/scenarios/fig4_herald.yaml  --out fig4.csv
    python -m src.jitterpovm oracle-check --config data/scenarios/oracle_suite.yaml --out oracle.csv

Exit codes:
    0  success
    1  at least one oracle check failed (the report is still written)
    2  invalid scenario configuration
    3  any other model error (coverage, impossible herald, ...)
"""

import argparse
import logging
import os
import sys
import tempfile
from typing import List, Optional

import pandas as pd
from dotenv import load_dotenv

from src.data.scenario_config import load_scenario
from src.exceptions import ConfigError, JitterPovmError
from src.integration.command_registry import command_summary, get_command, list_commands
from src.tools.figures import summarize

logger = logging.getLogger("jitterpovm")

LOG_FORMAT = "%(asctime)s [%(levelname)s] [%(name)s] %(message)s"
VERBOSITY = ["DEBUG", "INFO", "WARNING", "ERROR"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_MODEL = 3


def print_header(text, char="="):
    """Print a formatted header."""
    width = 70
    print("\n" + char * width)
    print(text.center(width))
    print(char * width + "\n")


def write_csv_atomic(frame: pd.DataFrame, path: str) -> None:
    """Write the table next to its destination first, then rename it into place."""
    full_path = os.path.abspath(path)
    dir_path = os.path.dirname(full_path)
    os.makedirs(dir_path, exist_ok=True)
    tmp_path = None
    try:
        with tempfile.NamedTemporaryFile("w", delete=False, dir=dir_path, encoding="utf-8",
                                         newline="", suffix=".csv.tmp") as f:
            tmp_path = f.name
            frame.to_csv(f, index=False, lineterminator="\n")
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_path, full_path)
        tmp_path = None
        logger.info("Wrote %d rows to %s", len(frame), full_path)
    finally:
        if tmp_path and os.path.exists(tmp_path):
            os.remove(tmp_path)


def create_cli_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jitterpovm",
        description="Firing-time, coincidence-delay and heralded-state densities for jittery detectors.",
        epilog="commands:\n" + command_summary(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=list_commands(), help="What to compute.")
    parser.add_argument("--config", required=True, help="Scenario YAML file.")
    parser.add_argument("--out", required=True, help="Output CSV path.")
    parser.add_argument("--seed", type=int, default=None, help="Overrides run.seed.")
    parser.add_argument("--trials", type=int, default=None, help="Overrides run.n_trials.")
    parser.add_argument("--n-jobs", type=int, default=None,
                        help="Simulator workers (default JITTERPOVM_N_JOBS or 1); never changes results.")
    parser.add_argument("--verbosity", choices=VERBOSITY, default=None,
                        help="Logging level (default JITTERPOVM_LOG_LEVEL or WARNING).")
    return parser


def _env_int(name: str, default: int) -> int:
    value = os.environ.get(name)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"expected an integer, got {value!r}", field=name) from None


def run(args: argparse.Namespace) -> int:
    command = get_command(args.command)
    config = load_scenario(args.config, seed=args.seed, n_trials=args.trials)
    configured = config.get("run", "command")
    if configured is not None and configured != command.name:
        raise config.error(f"scenario is for '{configured}', not '{command.name}'", "run.command")
    n_jobs = args.n_jobs if args.n_jobs is not None else _env_int("JITTERPOVM_N_JOBS", 1)

    frame = command.runner(config, n_jobs)
    write_csv_atomic(frame, args.out)

    if command.is_oracle:
        print_header(f"ORACLE CHECKS: {os.path.basename(args.config)}")
        print(frame.to_string(index=False))
        n_failed = int((~frame["passed"]).sum())
        print(f"\n{len(frame) - n_failed}/{len(frame)} checks passed")
        return EXIT_CHECK_FAILED if n_failed else EXIT_OK

    print_header(f"{command.name.upper()}: {os.path.basename(args.config)}")
    print(summarize(frame).to_string(index=False))
    print(f"\nSaved: {args.out}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = create_cli_parser().parse_args(argv)
    level = args.verbosity or os.environ.get("JITTERPOVM_LOG_LEVEL", "WARNING").upper()
    if level not in VERBOSITY:
        level = "WARNING"
    logging.basicConfig(level=level, format=LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")
    logging.getLogger().setLevel(level)

    try:
        return run(args)
    except ConfigError as e:
        logger.critical("Invalid scenario %s: %s", args.config, e)
        return EXIT_CONFIG
    except JitterPovmError as e:
        logger.critical("%s: %s", type(e).__name__, e)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
