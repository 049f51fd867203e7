"""
Sweep Manager
Runs the grid of one or more experiment files in parallel, records one CSV row
per (configuration, seed) and keeps going when individual runs fail.
"""

import csv
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from datasets.loader import DataBundle, load_data
from models.checkpoint import save_checkpoint
from training.experiment_config import DatasetSpec, ExperimentConfig, RunSpec
from training.network_builder import build_network, run_seeds
from training.trainer import evaluate, train

RESULT_COLUMNS = [
    "mode",
    "ratio",
    "U",
    "G",
    "dual",
    "hops",
    "seed",
    "stored_params",
    "virtual_params",
    "epochs",
    "test_error_pct",
    "train_error_pct",
    "wall_s",
]

# Data generation and the validation split do not vary with the run seed
DATA_SEED = 0


@dataclass
class SweepResult:
    rows: List[Dict[str, Any]] = field(default_factory=list)
    errors: Dict[str, str] = field(default_factory=dict)
    stats: Dict[str, Any] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return bool(self.errors)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_results_csv(rows: List[Dict[str, Any]], path: Union[str, Path]):
    """Header plus one row per run, in the fixed RESULT_COLUMNS order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([_cell(row.get(column)) for column in RESULT_COLUMNS])


def _base_row(run: RunSpec) -> Dict[str, Any]:
    return {
        "mode": run.layer_mode,
        "ratio": run.ratio,
        "U": run.U,
        "G": run.G,
        "dual": run.dual,
        "hops": run.hops,
        "seed": run.seed,
    }


class SweepManager:
    """
    Expands experiment files into runs, executes them and aggregates rows.
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """
        Initialize the sweep manager.

        Args:
            config: Configuration dictionary with options:
                - max_workers: Parallel runs (default: 1)
                - data_dir: Dataset root (default: ".")
                - layer_config: Runtime layer settings passed to every layer
                - save_logs: Write per-run train logs and checkpoints (default: False)
                - output_dir: Where per-run artifacts go (default: run.output)
        """
        self.config = config or {}
        self.logger = logging.getLogger(__name__)

        self.max_workers = max(1, int(self.config.get("max_workers", 1)))
        self.data_dir = self.config.get("data_dir", ".")
        self.layer_config = self.config.get("layer_config", {})
        self.save_logs = self.config.get("save_logs", False)
        self.output_dir = self.config.get("output_dir")

        self._data_lock = threading.Lock()
        self._data_cache: Dict[tuple, DataBundle] = {}

        self.stats = {
            "runs_total": 0,
            "runs_succeeded": 0,
            "runs_failed": 0,
            "execution_time": 0.0,
        }

    def load(self, spec: DatasetSpec) -> DataBundle:
        """Datasets of one experiment, loaded once and shared by all its runs and seeds."""
        key = (
            spec.source,
            spec.path,
            spec.kind,
            spec.train_size,
            spec.test_size,
            spec.validation_fraction,
            spec.num_classes,
        )
        with self._data_lock:
            if key not in self._data_cache:
                self._data_cache[key] = load_data(
                    spec.source,
                    data_dir=self.data_dir,
                    path=spec.path,
                    kind=spec.kind,
                    train_size=spec.train_size,
                    test_size=spec.test_size,
                    validation_fraction=spec.validation_fraction,
                    num_classes=spec.num_classes,
                    seed=DATA_SEED,
                )
            return self._data_cache[key]

    def run_all(self, experiments: List[ExperimentConfig]) -> SweepResult:
        """
        Run every grid cell of every experiment.

        Args:
            experiments: Parsed experiment files

        Returns:
            SweepResult with rows sorted by grid position, errors keyed by
            run name and execution statistics
        """
        start_time = time.time()
        runs = [run for experiment in experiments for run in experiment.expand()]
        self.stats["runs_total"] = len(runs)
        self.logger.info(f"Starting sweep of {len(runs)} runs with {self.max_workers} workers")

        indexed_rows = []
        errors = {}

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            future_to_run = {}
            for order, run in enumerate(runs):
                future = executor.submit(self._run_single, run)
                future_to_run[future] = (order, run)

            for future in as_completed(future_to_run):
                order, run = future_to_run[future]
                result = future.result()
                indexed_rows.append((order, result["row"]))

                if result["success"]:
                    self.stats["runs_succeeded"] += 1
                    self.logger.info(
                        f"✓ {run.name}: test error {result['row']['test_error_pct']:.2f}% "
                        f"({result['execution_time']:.2f}s)"
                    )
                else:
                    self.stats["runs_failed"] += 1
                    errors[run.name] = result["error"]
                    self.logger.warning(f"✗ {run.name} failed: {result['error']}")

        indexed_rows.sort(key=lambda item: item[0])
        self.stats["execution_time"] = time.time() - start_time

        self.logger.info(
            f"Sweep complete: {self.stats['runs_succeeded']}/{len(runs)} runs succeeded "
            f"in {self.stats['execution_time']:.2f}s"
        )
        return SweepResult(
            rows=[row for _, row in indexed_rows],
            errors=errors,
            stats=self.stats.copy(),
        )

    def _run_single(self, run: RunSpec) -> Dict[str, Any]:
        """
        Train and evaluate one grid cell.

        Returns:
            Dictionary with success status, the CSV row, execution time and error
        """
        start_time = time.time()
        row = _base_row(run)

        try:
            data = self.load(run.experiment.dataset)
            network = build_network(
                run, data.train.num_features, data.train.num_classes, self.layer_config
            )
            config = run.train_config(run_seeds(run)["shuffle"])
            result = train(network, data.train, config, test_set=data.test, validation_set=data.validation)

            row.update(
                {
                    "stored_params": network.parameter_count(),
                    "virtual_params": network.virtual_parameter_count(),
                    "epochs": config.epochs,
                    "test_error_pct": result.test.error_pct,
                    "train_error_pct": evaluate(network, data.train).error_pct,
                }
            )
            if config.record_wall_time:
                row["wall_s"] = time.time() - start_time

            if self.save_logs:
                output = Path(self.output_dir or run.experiment.run.output)
                result.log.to_csv(output / f"{run.name}.csv", config.record_wall_time)
                if run.experiment.run.checkpoint:
                    save_checkpoint(network, output / f"{run.name}.fhnn")

            return {
                "success": True,
                "row": row,
                "execution_time": time.time() - start_time,
                "error": None,
            }

        except Exception as e:
            self.logger.error(f"Error running {run.name}: {e}", exc_info=True)
            return {
                "success": False,
                "row": row,
                "execution_time": time.time() - start_time,
                "error": f"{type(e).__name__}: {e}",
            }


def sweep(
    experiments: List[ExperimentConfig],
    output: Optional[Union[str, Path]] = None,
    config: Optional[Dict[str, Any]] = None,
) -> SweepResult:
    """
    Run a sweep and optionally write its result table.

    An empty experiment list yields a header-only table.
    """
    result = SweepManager(config).run_all(experiments)
    if output is not None:
        write_results_csv(result.rows, output)
    return result
