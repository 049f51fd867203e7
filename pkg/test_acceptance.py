"""
Desk-scale MNIST runs. Slow; skipped unless the IDX files are present under
FUNHASH_DATA_DIR (or its mnist/ sub-directory).
"""

import csv
from pathlib import Path

import numpy as np
import pytest

from conftest import MNIST_DIR, requires_mnist
from datasets import mnist_available
from training.experiment_config import ExperimentConfig
from training.sweep_manager import RESULT_COLUMNS, sweep

pytestmark = [pytest.mark.slow, pytest.mark.mnist, requires_mnist]

MNIST_EXPERIMENT = """\
[dataset]
source = mnist
path = {path}
train_size = 10000
test_size = 2000

[network]
depth = 3
hidden = {hidden}

[compression]
modes = {modes}
ratios = {ratios}
variants = U4-G3
regime = {regime}

[training]
epochs = 15

[run]
seeds = 0, 1, 2
"""


def mnist_path() -> str:
    return "mnist" if mnist_available(Path(MNIST_DIR) / "mnist") else ""


def mean_error(rows, **match):
    errors = [row["test_error_pct"] for row in rows if all(row[k] == v for k, v in match.items())]
    assert len(errors) == 3
    return float(np.mean(errors))


def test_compressed_training_at_one_eighth(tmp_path):
    config = ExperimentConfig.parse(
        MNIST_EXPERIMENT.format(
            path=mnist_path(), hidden=200, modes="hashednets, funhash", ratios="1/8", regime="fixed-virtual"
        )
    )
    result = sweep([config], output=tmp_path / "table.csv", config={"data_dir": MNIST_DIR, "max_workers": 3})
    assert not result.failed

    funhash = mean_error(result.rows, mode="funhash")
    hashednets = mean_error(result.rows, mode="hashednets")
    assert funhash <= 8.0
    assert funhash <= hashednets + 0.3


def test_fixed_memory_expansion(tmp_path):
    config = ExperimentConfig.parse(
        MNIST_EXPERIMENT.format(
            path=mnist_path(), hidden=50, modes="funhash", ratios="1, 1/4, 1/16", regime="fixed-memory"
        )
    )
    output = tmp_path / "fixed_memory.csv"
    result = sweep([config], output=output, config={"data_dir": MNIST_DIR, "max_workers": 3})
    assert not result.failed

    header = output.read_text().splitlines()[0]
    assert header == ",".join(RESULT_COLUMNS)
    assert len(result.rows) == 9

    baseline = mean_error(result.rows, ratio=1.0)
    for ratio in (0.25, 0.0625):
        assert mean_error(result.rows, ratio=ratio) <= baseline + 1.5

    # K and alpha stay put; only the biases follow the virtual width
    fixed = {row["stored_params"] - round(50 / row["ratio"]) - 10 for row in result.rows}
    assert len(fixed) == 1


def test_compressed_training_loss_decreases(tmp_path):
    text = MNIST_EXPERIMENT.format(
        path=mnist_path(), hidden=200, modes="funhash", ratios="1/8", regime="fixed-virtual"
    )
    config = ExperimentConfig.parse(
        text.replace("epochs = 15", "epochs = 5\nlearning_rate = 0.01").replace("seeds = 0, 1, 2", "seeds = 0")
    )
    output = tmp_path / "logs"
    result = sweep([config], config={"data_dir": MNIST_DIR, "save_logs": True, "output_dir": str(output)})
    assert not result.failed

    (run,) = config.expand()
    with open(output / f"{run.name}.csv", newline="") as handle:
        losses = [float(row["train_loss"]) for row in csv.DictReader(handle)]
    assert len(losses) == 5
    assert all(later < earlier for earlier, later in zip(losses, losses[1:]))
