#!/usr/bin/env python
"""
lineage-lab CLI entry point
"""

import argparse
import logging
import sys
from typing import List, Optional

from lineage_lab.utils.constants import EXIT_CONFIG_ERROR, EXIT_OK, LOG_FORMAT, LOG_LEVEL

logger = logging.getLogger(__name__)

COMMANDS = {
    "validate": "Check a config and the scenario's standing assumptions",
    "simulate": "Simulate replicas of the branching process",
    "estimate-mean": "Estimate expected counts with the spine process",
    "solve": "Solve the constrained and unconstrained value fields",
    "compare": "Compare simulated exponents with u_0 and U",
    "lineage-check": "Check concentration of lineages around the optimal trajectory",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="lineage-lab - large-K exponents of branching populations with ancestry",
        prog="lineage-lab",
    )
    subparsers = parser.add_subparsers(dest="command", help="Command to run")
    for name, help_text in COMMANDS.items():
        command_parser = subparsers.add_parser(name, help=help_text, description=help_text)
        command_parser.add_argument(
            "--config", help="Path to the experiment YAML file (default: built-in defaults)"
        )
        command_parser.add_argument("--seed", type=int, help="Root seed, overrides simulation.seed")
        command_parser.add_argument("--out", help="Output directory, overrides output.directory")
        command_parser.add_argument(
            "--log-level",
            choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
            default=LOG_LEVEL,
            help=f"Set the logging level (default: {LOG_LEVEL})",
        )
        if name == "simulate":
            command_parser.add_argument(
                "--dump-ancestry",
                action="store_true",
                help="Write the full ancestry of every replica as CSV",
            )
    return parser


def configure_logging(log_level: str) -> None:
    """Configure logging with the specified level."""
    logging.basicConfig(level=getattr(logging, log_level), format=LOG_FORMAT, force=True)


def _load(args):
    from lineage_lab.parsers.config import ExperimentConfig, load_config

    config = load_config(args.config) if args.config else ExperimentConfig()
    config = config.with_overrides(seed=args.seed, out=args.out)
    if getattr(args, "dump_ancestry", False):
        config = config.model_copy(update={"output": config.output.model_copy(update={"dump_ancestry": True})})
    return config


def _validate(config) -> List[str]:
    from lineage_lab.parsers.config import build_scenario

    scenario = build_scenario(config)
    domain = tuple(config.grid.domain) if config.grid.domain else None
    return [str(violation) for violation in scenario.validate(domain)]


def run_command(args) -> int:
    from lineage_lab.experiments import compare

    config = _load(args)
    violations = _validate(config)
    if violations:
        for violation in violations:
            logger.error(f"Standing assumption violated: {violation}")
            print(f"Violation: {violation}")
        return EXIT_CONFIG_ERROR
    if args.command == "validate":
        print("Config and scenario are valid")
        return EXIT_OK
    if args.command == "simulate":
        outcomes = compare.run_simulate(config)
        capped = sum(outcome.capped for outcome in outcomes)
        print(f"Simulated {len(outcomes)} replicas ({capped} capped) into {config.output.directory}")
        return EXIT_OK
    if args.command == "estimate-mean":
        rows = compare.run_estimate_mean(config)
        print(f"Wrote {len(rows)} estimates into {config.output.directory}")
        return EXIT_OK
    if args.command == "solve":
        compare.run_solve(config)
        print(f"Wrote fields into {config.output.directory}")
        return EXIT_OK
    if args.command == "compare":
        report = compare.run_compare(config)
    else:
        report = compare.run_lineage_check(config)
    for failure in report.failures:
        print(f"FAILED: {failure}")
    print(f"{args.command}: {'all assertions hold' if not report.failures else 'assertions failed'}")
    return report.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for the lineage-lab CLI
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return EXIT_OK

    configure_logging(args.log_level)

    from lineage_lab.kernels.base import KernelDomainError, KernelSaturationError
    from lineage_lab.parsers.config import ConfigError
    from lineage_lab.scenario.scenario import ScenarioError
    from lineage_lab.solvers.variational import SolverGridError

    try:
        return run_command(args)
    except (ConfigError, ScenarioError, SolverGridError, KernelDomainError, KernelSaturationError) as e:
        logger.error(f"{args.command} failed: {str(e)}", exc_info=True)
        print(f"Error: {e}")
        return EXIT_CONFIG_ERROR
    except KeyboardInterrupt:
        print("\nStopped by user")
        return 130


if __name__ == "__main__":
    sys.exit(main())
