"""
Dataset Loader
Resolves a dataset description into train/test (and optional validation)
datasets: MNIST-named IDX files under a data directory, an explicit IDX
file set, a flat text pair (BG-IMG, CONVEX) or a synthetic generator.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from compression.hash_family import derive_seed
from datasets.dataset import Dataset, DatasetError, DatasetNotFoundError, split
from datasets.flat import find_flat_file, load_flat
from datasets.idx import load_idx
from datasets.synthetic import make_synthetic

logger = logging.getLogger(__name__)

SOURCES = ("mnist", "idx", "flat", "synthetic")

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


@dataclass
class DataBundle:
    train: Dataset
    test: Dataset
    validation: Optional[Dataset] = None


def find_idx_file(directory: Path, stem: str) -> Path:
    """Locate `stem` or `stem.gz` inside directory."""
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    raise DatasetNotFoundError(f"Neither {stem} nor {stem}.gz found in {directory}")


def mnist_available(data_dir: Union[str, Path, None]) -> bool:
    """True when all four MNIST IDX files are present."""
    if not data_dir:
        return False
    try:
        for stem in MNIST_FILES.values():
            find_idx_file(Path(data_dir), stem)
    except DatasetNotFoundError:
        return False
    return True


def load_data(
    source: str,
    data_dir: Union[str, Path, None] = None,
    path: Optional[str] = None,
    kind: str = "blobs",
    train_size: Optional[int] = None,
    test_size: Optional[int] = None,
    validation_fraction: float = 0.0,
    num_classes: int = 10,
    seed: int = 0,
) -> DataBundle:
    """
    Load the datasets of one experiment.

    Args:
        source: "mnist", "idx", "flat" or "synthetic"
        data_dir: Dataset root (FUNHASH_DATA_DIR)
        path: Sub-directory of data_dir (or absolute path) holding the IDX or flat files
        kind: Synthetic generator name
        train_size: Keep only the first N training samples
        test_size: Keep only the first N test samples
        validation_fraction: Share of the training set held out for validation
        num_classes: Class count of IDX and flat data
        seed: Master seed for synthetic data and the validation split

    Returns:
        DataBundle with train, test and optional validation sets
    """
    if source not in SOURCES:
        raise DatasetError(f"Unknown dataset source {source!r}; expected one of {SOURCES}")

    if source == "synthetic":
        train = make_synthetic(kind, train_size or 1000, derive_seed(seed, "data", "train"))
        test = make_synthetic(
            kind, test_size or 200, derive_seed(seed, "data", "test"), partition="test"
        )
    else:
        root = Path(data_dir or ".") / (path or "")
        if not root.is_dir():
            raise DatasetNotFoundError(f"Dataset directory {root} does not exist")
        if source == "flat":
            train = load_flat(find_flat_file(root, "train"), num_classes, root.name, "train")
            test = load_flat(find_flat_file(root, "test"), num_classes, root.name, "test")
        else:
            files = {key: find_idx_file(root, stem) for key, stem in MNIST_FILES.items()}
            train = load_idx(files["train_images"], files["train_labels"], num_classes, source, "train")
            test = load_idx(files["test_images"], files["test_labels"], num_classes, source, "test")
        train = train.head(train_size)
        test = test.head(test_size)

    validation = None
    if validation_fraction:
        train, validation = split(train, validation_fraction, derive_seed(seed, "split"))

    logger.info(
        f"Data ready: {len(train)} train, {len(test)} test"
        + (f", {len(validation)} validation" if validation is not None else "")
    )
    return DataBundle(train=train, test=test, validation=validation)
