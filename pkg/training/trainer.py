"""
Trainer
Shuffled minibatch SGD with classical momentum, per-epoch evaluation and a
CSV training log.
"""

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from datasets.dataset import Dataset
from models.base_layer import LayerGrad
from models.network import Network

logger = logging.getLogger(__name__)

LOG_COLUMNS = [
    "epoch",
    "train_loss",
    "train_error_pct",
    "test_error_pct",
    "validation_error_pct",
]


class TrainingDivergedError(ArithmeticError):
    """The training loss became non-finite"""

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"Loss diverged to {loss} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 15
    seed: int = 0
    eval_every: int = 1
    lr_decay: float = 0.99
    record_wall_time: bool = False

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.lr_decay <= 0:
            raise ValueError(f"lr_decay must be > 0, got {self.lr_decay}")

    def learning_rate_at(self, epoch: int) -> float:
        """Rate used during a 1-based epoch."""
        return self.learning_rate * self.lr_decay ** (epoch - 1)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_error_pct: float
    test_error_pct: Optional[float] = None
    validation_error_pct: Optional[float] = None
    wall_s: Optional[float] = None


@dataclass
class TrainLog:
    rows: List[EpochRecord] = field(default_factory=list)

    def append(self, record: EpochRecord):
        expected = len(self.rows) + 1
        if record.epoch != expected:
            raise ValueError(f"Epoch {record.epoch} logged where {expected} was expected")
        self.rows.append(record)

    @property
    def final(self) -> Optional[EpochRecord]:
        return self.rows[-1] if self.rows else None

    def losses(self) -> List[float]:
        return [row.train_loss for row in self.rows]

    def to_csv(self, path: Union[str, Path], include_wall_time: bool = False):
        """Write one row per epoch; wall_s is only written when requested."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        columns = LOG_COLUMNS + (["wall_s"] if include_wall_time else [])

        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(columns)
            for row in self.rows:
                writer.writerow([_format_cell(getattr(row, name)) for name in columns])


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


@dataclass
class EvalResult:
    error_pct: float
    mean_loss: float
    predictions: np.ndarray


@dataclass
class TrainResult:
    network: Network
    log: TrainLog
    test: Optional[EvalResult] = None


class SGDMomentum:
    """
    Classical momentum: v <- mu v - lr g, p <- p + v.

    With mu = 0 this is the plain update p <- p - lr g.
    """

    def __init__(self, momentum: float = 0.9):
        self.momentum = momentum
        self.velocities: List[Dict[str, np.ndarray]] = []

    def step(self, params: List[Dict[str, np.ndarray]], grads: List[LayerGrad], learning_rate: float):
        if not self.velocities:
            self.velocities = [
                {name: np.zeros_like(array) for name, array in layer.items()} for layer in params
            ]

        for layer_params, layer_grad, layer_velocity in zip(params, grads, self.velocities):
            for name, array in layer_params.items():
                velocity = layer_velocity[name]
                velocity *= self.momentum
                velocity -= learning_rate * layer_grad.params[name]
                array += velocity


def targets_for(network: Network, dataset: Dataset) -> np.ndarray:
    """Class indices for a softmax head, one-hot rows for a squared head."""
    return dataset.labels if network.head == "softmax" else dataset.one_hot()


def confusion_matrix(labels: np.ndarray, predictions: np.ndarray, num_classes: int) -> np.ndarray:
    """Counts[true, predicted]."""
    codes = np.asarray(labels) * num_classes + np.asarray(predictions)
    return np.bincount(codes, minlength=num_classes * num_classes).reshape(num_classes, num_classes)


def evaluate(network: Network, dataset: Dataset, batch_size: int = 1000) -> EvalResult:
    """
    Error rate (argmax mismatches) and mean loss over a dataset.

    Args:
        network: Network to evaluate
        dataset: Labelled data
        batch_size: Samples per forward pass

    Returns:
        EvalResult with error in percent
    """
    targets = targets_for(network, dataset)
    predictions = np.empty(len(dataset), dtype=np.int64)
    total_loss = 0.0

    for start in range(0, len(dataset), batch_size):
        stop = min(start + batch_size, len(dataset))
        outputs = network.forward(dataset.inputs[start:stop]).outputs
        total_loss += network.loss(outputs, targets[start:stop]) * (stop - start)
        predictions[start:stop] = np.argmax(outputs, axis=1)

    errors = int(np.count_nonzero(predictions != dataset.labels))
    return EvalResult(
        error_pct=100.0 * errors / len(dataset),
        mean_loss=total_loss / len(dataset),
        predictions=predictions,
    )


def train(
    network: Network,
    dataset: Dataset,
    config: TrainConfig,
    test_set: Optional[Dataset] = None,
    validation_set: Optional[Dataset] = None,
) -> TrainResult:
    """
    Train a network in place.

    Args:
        network: Network whose parameters are updated
        dataset: Training data
        config: Optimizer and schedule settings
        test_set: Evaluated every eval_every epochs and after the last one
        validation_set: Held-out data evaluated on the same cadence

    Returns:
        TrainResult with the trained network and its TrainLog

    Raises:
        TrainingDivergedError: The minibatch loss is not finite
    """
    if dataset.num_features != network.d_in:
        raise ValueError(
            f"Dataset has {dataset.num_features} features but the network expects {network.d_in}"
        )

    rng = np.random.default_rng(config.seed)
    optimizer = SGDMomentum(config.momentum)
    targets = targets_for(network, dataset)
    log = TrainLog()
    started = time.perf_counter()
    n = len(dataset)

    logger.info(
        f"Training {network} on {n} samples for {config.epochs} epochs "
        f"(lr={config.learning_rate}, momentum={config.momentum}, batch={config.batch_size})"
    )

    for epoch in range(1, config.epochs + 1):
        learning_rate = config.learning_rate_at(epoch)
        order = rng.permutation(n)
        total_loss = 0.0
        mistakes = 0

        for batch_number, start in enumerate(range(0, n, config.batch_size)):
            index = order[start : start + config.batch_size]
            trace = network.forward(dataset.inputs[index])
            batch_targets = targets[index]
            loss = network.loss(trace.outputs, batch_targets)
            if not math.isfinite(loss):
                logger.error(f"Non-finite loss at epoch {epoch}, batch {batch_number}")
                raise TrainingDivergedError(epoch, batch_number, loss)

            total_loss += loss * index.size
            mistakes += int(np.count_nonzero(np.argmax(trace.outputs, axis=1) != dataset.labels[index]))

            grads = network.backward(batch_targets, trace)
            optimizer.step(network.params(), grads, learning_rate)
            logger.debug(f"epoch {epoch} batch {batch_number}: loss={loss:.6f}")

        record = EpochRecord(
            epoch=epoch,
            train_loss=total_loss / n,
            train_error_pct=100.0 * mistakes / n,
        )
        if epoch % config.eval_every == 0 or epoch == config.epochs:
            if test_set is not None:
                record.test_error_pct = evaluate(network, test_set).error_pct
            if validation_set is not None:
                record.validation_error_pct = evaluate(network, validation_set).error_pct
        if config.record_wall_time:
            record.wall_s = time.perf_counter() - started
        log.append(record)

        logger.info(
            f"Epoch {epoch}/{config.epochs}: loss={record.train_loss:.4f} "
            f"train_err={record.train_error_pct:.2f}% "
            f"test_err={_format_cell(record.test_error_pct) or '-'} "
            f"val_err={_format_cell(record.validation_error_pct) or '-'}"
        )

    test_result = evaluate(network, test_set) if test_set is not None else None
    return TrainResult(network=network, log=log, test=test_result)
