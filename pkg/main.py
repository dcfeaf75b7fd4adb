#!/usr/bin/env python3
"""
Command-line entry point for the photon-number-resolution experiments.
Each subcommand reads an experiment config file and writes a CSV table.
"""

import argparse
import sys
from typing import List, Optional

from pydantic import ValidationError

from experiments import get_experiment_registry, load_config, run, validate
from experiments.base import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE
from models.schemas import ExperimentConfig, ExperimentKind
from utils.config import get_settings
from utils.errors import ConfigError
from utils.logging import get_logger, setup_logging

logger = get_logger()


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return seed


def _positive(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Photon-number resolution with cascaded three-level emitters",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Linear-model mean count error
  python main.py linear --config configs/linear.cfg

  # Trajectory ensemble with an explicit seed and four threads
  python main.py trajectory --config configs/trajectory.cfg --seed 7 --threads 4

  # Check a config without running it
  python main.py validate --config configs/compare.cfg

  # List available experiments
  python main.py --list
        """,
    )
    parser.add_argument("--list", action="store_true", help="List available experiments")
    parser.add_argument("--log-level", help="Console log level (default: settings.log_level)")

    commands = parser.add_subparsers(dest="command")
    for kind in ExperimentKind:
        experiment = get_experiment_registry().get_experiment(kind.value)
        sub = commands.add_parser(kind.value, help=experiment.metadata.description if experiment else None)
        sub.add_argument("--config", required=True, help="Experiment config file")
        sub.add_argument("--out", help="Output CSV path (overrides output.path)")
        sub.add_argument("--seed", type=_seed, help="Base seed (overrides trajectory.seed)")
        sub.add_argument("--trajectories", type=_positive, help="Trajectories per point (overrides trajectory.count)")
        sub.add_argument("--threads", type=_positive, help="Worker threads (overrides PNRSIM_THREADS)")

    check = commands.add_parser("validate", help="Report config diagnostics without running")
    check.add_argument("--config", required=True, help="Experiment config file")
    return parser


def apply_overrides(config: ExperimentConfig, seed: Optional[int], trajectories: Optional[int]) -> ExperimentConfig:
    """Config with command-line overrides applied and validated again."""
    data = config.model_dump()
    if seed is not None:
        data["trajectory"]["seed"] = seed
    if trajectories is not None:
        data["trajectory"]["count"] = trajectories
    return ExperimentConfig.model_validate(data)


def _report(diagnostics: List[str]) -> None:
    for line in diagnostics:
        print(line, file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(level=args.log_level)

    if args.list:
        for metadata in get_experiment_registry().get_all_metadata():
            print(f"{metadata.name:12s} {metadata.description}")
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE

    experiment = None if args.command == "validate" else args.command
    try:
        config = load_config(args.config, experiment)
        if args.command == "validate":
            diagnostics = validate(config)
            _report(diagnostics)
            return EXIT_USAGE if diagnostics else EXIT_OK
        config = apply_overrides(config, args.seed, args.trajectories)
    except ConfigError as e:
        _report(e.diagnostics)
        return EXIT_USAGE
    except ValidationError as e:
        _report([f"{'.'.join(str(p) for p in error['loc'])}: {error['msg']}" for error in e.errors()])
        return EXIT_USAGE

    get_settings().ensure_directories()
    result = run(config, out=args.out, threads=args.threads)
    if result.success:
        print(result.path)
        return EXIT_OK
    if result.diagnostics:
        _report(result.diagnostics)
    else:
        print(result.error, file=sys.stderr)
    return result.exit_code or EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
