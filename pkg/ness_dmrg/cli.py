"""
Command-line interface for NESS-DMRG.

    ness-dmrg run <config> [--out DIR] [--seed S] [--allow-unconverged] [--scheme rln|rnln]
    ness-dmrg oracle <config> [--out DIR]
"""

import argparse
import logging
import os
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from ness_dmrg import __version__
from ness_dmrg.config import ENV_LOG_LEVEL, ConfigError, load_config
from ness_dmrg.core.exact import MAX_NESS_SITES, write_fixture
from ness_dmrg.experiments import EXIT_CONFIG_ERROR, EXIT_OK, run_experiment

logger = logging.getLogger("ness_dmrg.cli")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ness-dmrg",
        description="Non-equilibrium steady states of boundary-driven XXZ chains with DMRG",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        type=str.upper,
        default=os.getenv(ENV_LOG_LEVEL, "INFO"),
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run the experiment described by a config file")
    run.add_argument("config", type=str, help="YAML or JSON experiment config")
    run.add_argument("--out", type=str, default=None, help="Output directory (overrides output_dir)")
    run.add_argument("--seed", type=int, default=None, help="Seed for randomized start states")
    run.add_argument("--scheme", type=str, choices=["rln", "rnln"], default=None, help="Superspace ordering")
    run.add_argument("--workers", type=int, default=None, help="Parallel workers for scans")
    run.add_argument(
        "--allow-unconverged", action="store_true", default=None, help="Exit 0 even if a run did not converge"
    )

    oracle = subparsers.add_parser("oracle", help="Write dense steady-state fixtures for small chains")
    oracle.add_argument("config", type=str, help="YAML or JSON experiment config")
    oracle.add_argument("--out", type=str, default=None, help="Output directory (overrides output_dir)")
    return parser


def _run(args: argparse.Namespace) -> int:
    overrides = {
        "output_dir": args.out,
        "seed": args.seed,
        "scheme": args.scheme,
        "workers": args.workers,
        "allow_unconverged": args.allow_unconverged,
    }
    config = load_config(args.config, overrides)
    logger.info("Running %s experiment, output in %s", config.experiment, config.output_dir)
    return run_experiment(config)


def _oracle(args: argparse.Namespace) -> int:
    config = load_config(args.config, {"output_dir": args.out})
    sizes = config.scan.sizes if config.experiment == "size_scan" else [config.model_params().n_sites]
    too_large = [n for n in sizes if n > MAX_NESS_SITES]
    if too_large:
        raise ConfigError(f"Dense oracle is limited to N <= {MAX_NESS_SITES}, got {too_large}")
    for n in sizes:
        params = config.model_params(n_sites=n)
        write_fixture(Path(config.output_dir) / f"oracle_N{n}.json", params)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and dispatch.

    Args:
        argv: Arguments (defaults to sys.argv[1:])

    Returns:
        Exit status: 0 success, 2 non-convergence, 3 configuration error
    """
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)

    try:
        if args.command == "run":
            return _run(args)
        return _oracle(args)
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG_ERROR
    except OSError as e:
        logger.error("Cannot write output: %s", e)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
