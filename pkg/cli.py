"""
funhash-nets command line
Train single experiments, run compression sweeps and verification suites.

    python cli.py train  --config experiments/mnist_one_eighth.ini --out results/one_eighth
    python cli.py sweep  --config experiments/mnist_fixed_virtual.ini --out results/fixed_virtual.csv --jobs 4
    python cli.py verify lemma oracles --out results/verify.csv

Exit codes: 0 success, 1 run or verification failure, 2 configuration or
dataset error, 130 interrupted.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

load_dotenv()

from compression.exceptions import ConfigurationError  # noqa: E402
from config import get_config  # noqa: E402
from datasets.dataset import DatasetError  # noqa: E402
from diagnostics.verify_suites import SUITES, run_suites, write_report  # noqa: E402
from logging_setup import configure_logging  # noqa: E402
from training.experiment_config import (  # noqa: E402
    ExperimentConfig,
    ExperimentConfigError,
    _parse_float,
)
from training.sweep_manager import SweepManager, write_results_csv  # noqa: E402

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INTERRUPTED = 130


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="funhash",
        description="Neural network compression with hashed reconstruction functions",
    )
    parser.add_argument("--log-json", action="store_true", help="Emit JSON log records")
    parser.add_argument("--log-level", default=None, help="Override LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="Train every run of one experiment file")
    train.add_argument("--config", required=True, help="Experiment INI file")
    train.add_argument("--out", default=None, help="Output directory (default: run.output)")
    train.add_argument("--seed", type=int, default=None, help="Replace the seed list")
    train.add_argument("--jobs", type=int, default=1, help="Parallel runs")

    sweep = commands.add_parser("sweep", help="Run the grid of one or more experiment files")
    sweep.add_argument("--config", required=True, nargs="+", help="Experiment INI file(s)")
    sweep.add_argument("--out", default=None, help="Results CSV (default: <run.output>/sweep.csv)")
    sweep.add_argument("--jobs", type=int, default=None, help="Parallel runs")
    sweep.add_argument("--seed", type=int, default=None, help="Replace the seed list")
    sweep.add_argument("--ratios", default=None, help="Replace the ratio list, e.g. '1, 1/4'")

    verify = commands.add_parser("verify", help="Run verification suites")
    verify.add_argument(
        "suites", nargs="*", help=f"Suites to run: {', '.join(SUITES)} or all (default)"
    )
    verify.add_argument("--out", default=None, help="Report CSV (default: stdout)")
    verify.add_argument("--seed", type=int, default=0, help="Master seed")
    verify.add_argument("--trials", type=int, default=None, help="Monte-Carlo trials of the lemma suite")
    return parser


def _load_config(path: str, seed: Optional[int], ratios: Optional[str] = None) -> ExperimentConfig:
    experiment = ExperimentConfig.from_file(path)
    if seed is not None:
        experiment.run.seeds = [seed]
    if ratios:
        try:
            experiment.compression.ratios = [_parse_float(item) for item in ratios.split(",")]
        except (ValueError, ZeroDivisionError) as e:
            raise ExperimentConfigError(f"bad --ratios {ratios!r}", "compression", "ratios") from e
        experiment.validate()
    return experiment


def _manager(settings, jobs: Optional[int], **extra) -> SweepManager:
    return SweepManager(
        {
            "max_workers": jobs or settings.SWEEP_WORKERS,
            "data_dir": settings.DATA_DIR,
            "layer_config": settings.layer_settings(),
            **extra,
        }
    )


def cmd_train(args, settings) -> int:
    """Train every run of one experiment; write train logs, checkpoints and a results CSV."""
    experiment = _load_config(args.config, args.seed)
    output = Path(args.out or experiment.run.output)
    manager = _manager(settings, args.jobs, save_logs=True, output_dir=str(output))

    # Data problems surface here, before any run starts
    manager.load(experiment.dataset)

    result = manager.run_all([experiment])
    write_results_csv(result.rows, output / "results.csv")
    logger.info(f"Wrote {len(result.rows)} result rows to {output / 'results.csv'}")
    return EXIT_FAILURE if result.failed else EXIT_OK


def cmd_sweep(args, settings) -> int:
    """Run the full grid of every experiment file into one results CSV."""
    experiments = [_load_config(path, args.seed, args.ratios) for path in args.config]
    manager = _manager(settings, args.jobs)
    for experiment in experiments:
        manager.load(experiment.dataset)

    result = manager.run_all(experiments)
    if args.out:
        output = Path(args.out)
    else:
        output = Path(experiments[0].run.output if experiments else settings.RESULTS_DIR) / "sweep.csv"
    write_results_csv(result.rows, output)
    logger.info(f"Wrote {len(result.rows)} result rows to {output}")
    return EXIT_FAILURE if result.failed else EXIT_OK


def cmd_verify(args, settings) -> int:
    """Run verification suites and emit a pass/fail CSV report."""
    requested = args.suites or ["all"]
    unknown = [name for name in requested if name not in SUITES and name != "all"]
    if unknown:
        raise ConfigurationError(f"Unknown verification suite(s): {', '.join(unknown)}")
    names = list(SUITES) if "all" in requested else list(dict.fromkeys(requested))
    results = run_suites(
        names,
        seed=args.seed,
        trials=args.trials or settings.LEMMA_TRIALS,
        enumeration_cap=settings.ENUMERATION_CAP,
    )

    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as handle:
            write_report(results, handle)
    else:
        write_report(results)

    failed = [result for result in results if not result.passed]
    logger.info(f"Verification: {len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_FAILURE if failed else EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_config()
    configure_logging(settings, json_logs=args.log_json, level=args.log_level)

    try:
        return COMMANDS[args.command](args, settings)
    except (ExperimentConfigError, DatasetError, ConfigurationError) as e:
        logger.error(f"✗ {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    try:
        exit_code = main()
        sys.exit(exit_code)
    except KeyboardInterrupt:
        print("\n\nInterrupted by user.", file=sys.stderr)
        sys.exit(EXIT_INTERRUPTED)
    except Exception as e:
        logging.getLogger(__name__).error(f"✗ Unexpected error: {e}", exc_info=True)
        sys.exit(EXIT_FAILURE)
