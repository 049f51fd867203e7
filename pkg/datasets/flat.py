"""
Flat Text Datasets
The layout of the BG-IMG and CONVEX distributions: one sample per line,
D whitespace-separated feature values in [0, 1] followed by the class label.
Files ending in .gz are decompressed on the fly.
"""

import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from datasets.dataset import Dataset, DatasetError, DatasetNotFoundError

logger = logging.getLogger(__name__)

FLAT_SUFFIX = ".amat"


class FlatFormatError(DatasetError):
    """Ragged rows, non-numeric cells or fractional labels"""


def read_flat(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read a flat text file.

    Returns:
        (inputs of shape (N, D), integer labels of shape (N,))
    """
    path = Path(path)
    if not path.exists():
        raise DatasetNotFoundError(f"Flat dataset file {path} does not exist")
    try:
        table = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError as e:
        raise FlatFormatError(f"{path}: {e}") from e

    if table.shape[0] == 0 or table.shape[1] < 2:
        raise FlatFormatError(f"{path}: expected rows of features plus a label, got shape {table.shape}")
    labels = table[:, -1]
    if not np.array_equal(labels, np.round(labels)):
        raise FlatFormatError(f"{path}: labels must be whole numbers")
    return table[:, :-1], labels.astype(np.int64)


def find_flat_file(directory: Path, partition: str) -> Path:
    """The single `*<partition>*.amat` (or `.amat.gz`) file inside directory."""
    matches = sorted(
        candidate
        for pattern in (f"*{partition}*{FLAT_SUFFIX}", f"*{partition}*{FLAT_SUFFIX}.gz")
        for candidate in directory.glob(pattern)
    )
    if len(matches) != 1:
        found = ", ".join(m.name for m in matches) or "none"
        raise DatasetNotFoundError(
            f"Expected one *{partition}*{FLAT_SUFFIX} file in {directory}, found {found}"
        )
    return matches[0]


def load_flat(
    path: Union[str, Path],
    num_classes: int = 10,
    name: str = "flat",
    partition: str = "train",
) -> Dataset:
    """
    Load a flat text file as a Dataset.

    Raises:
        FlatFormatError: Malformed file
        LabelRangeError: A label is not below num_classes
    """
    inputs, labels = read_flat(path)
    dataset = Dataset(inputs=inputs, labels=labels, num_classes=num_classes, name=name, partition=partition)
    logger.info(f"Loaded {dataset} from {path}")
    return dataset
