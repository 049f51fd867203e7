"""
Dataset
Immutable labelled datasets, their validation and the train/validation split.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    """Dataset could not be loaded or violates its invariants"""

    pass


class DatasetNotFoundError(DatasetError, FileNotFoundError):
    """A dataset file or directory does not exist"""

    pass


class LabelRangeError(DatasetError):
    """Class labels outside [0, C)"""

    pass


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Dataset:
    """
    N samples of D features in [0, 1] with class labels in [0, C).

    The arrays are read-only once the dataset is built, so a Dataset can be
    shared freely between runs and threads.
    """

    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = "dataset"
    partition: str = "train"

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=np.float64)
        labels = np.asarray(self.labels)

        if inputs.ndim != 2:
            raise DatasetError(f"{self.name}: inputs must be an N x D matrix, got {inputs.shape}")
        if inputs.shape[0] == 0:
            raise DatasetError(f"{self.name}: dataset is empty")
        if labels.shape != (inputs.shape[0],):
            raise DatasetError(
                f"{self.name}: {inputs.shape[0]} samples but labels of shape {labels.shape}"
            )
        if self.num_classes < 1:
            raise DatasetError(f"{self.name}: class count must be positive")
        if not np.all(np.isfinite(inputs)):
            raise DatasetError(f"{self.name}: inputs contain non-finite values")
        if inputs.min() < 0.0 or inputs.max() > 1.0:
            raise DatasetError(
                f"{self.name}: inputs must lie in [0, 1], got [{inputs.min()}, {inputs.max()}]"
            )
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise LabelRangeError(
                f"{self.name}: labels must lie in [0, {self.num_classes}), "
                f"got [{labels.min()}, {labels.max()}]"
            )

        object.__setattr__(self, "inputs", _frozen(inputs))
        object.__setattr__(self, "labels", _frozen(labels.astype(np.int64)))

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def num_features(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices: np.ndarray, partition: str = None) -> "Dataset":
        """Dataset restricted to the given sample indices, in that order."""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            inputs=self.inputs[indices],
            labels=self.labels[indices],
            num_classes=self.num_classes,
            name=self.name,
            partition=partition or self.partition,
        )

    def head(self, count: int) -> "Dataset":
        """First `count` samples (all of them when count is None or too large)."""
        if count is None or count >= len(self):
            return self
        return self.subset(np.arange(count))

    def one_hot(self) -> np.ndarray:
        targets = np.zeros((len(self), self.num_classes))
        targets[np.arange(len(self)), self.labels] = 1.0
        return targets

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def __repr__(self):
        return (
            f"<Dataset {self.name}/{self.partition} N={len(self)} "
            f"D={self.num_features} C={self.num_classes}>"
        )


def split_indices(n: int, fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Random disjoint partition of range(n).

    Returns:
        (train indices, validation indices); the validation part holds
        round(fraction * n) samples
    """
    if not 0.0 < fraction < 1.0:
        raise DatasetError(f"Split fraction must lie in (0, 1), got {fraction}")
    held_out = int(round(fraction * n))
    if held_out == 0 or held_out == n:
        raise DatasetError(f"Fraction {fraction} of {n} samples leaves an empty part")

    order = np.random.default_rng(seed).permutation(n)
    return np.sort(order[held_out:]), np.sort(order[:held_out])


def split(dataset: Dataset, fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """
    Split a dataset into (train, validation).

    Args:
        dataset: Dataset to split
        fraction: Share of samples held out for validation
        seed: Permutation seed

    Returns:
        Tuple of (train, validation) datasets
    """
    train_idx, val_idx = split_indices(len(dataset), fraction, seed)
    logger.debug(f"Split {dataset.name}: {len(train_idx)} train / {len(val_idx)} validation")
    return dataset.subset(train_idx, "train"), dataset.subset(val_idx, "validation")
