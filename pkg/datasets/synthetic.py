"""
Synthetic Datasets
Small deterministic problems for desk-scale runs and tests:

    blobs        two Gaussian clusters, linearly separable
    xor          uniform points in the unit square labelled by quadrant parity
    convex-like  12x12 images of filled discs (convex) vs rings (not convex)
"""

import logging

import numpy as np

from datasets.dataset import Dataset, DatasetError

logger = logging.getLogger(__name__)

KINDS = ("blobs", "xor", "convex-like")

IMAGE_SIDE = 12


def _balanced_labels(n: int, classes: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(np.arange(n) % classes)


def _min_max(X: np.ndarray) -> np.ndarray:
    low = X.min(axis=0)
    span = X.max(axis=0) - low
    span[span == 0] = 1.0
    return (X - low) / span


def _blobs(n: int, rng: np.random.Generator):
    labels = _balanced_labels(n, 2, rng)
    centers = np.array([[-2.0, -2.0], [2.0, 2.0]])
    X = centers[labels] + 0.5 * rng.standard_normal((n, 2))
    return _min_max(X), labels


def _xor(n: int, rng: np.random.Generator):
    X = rng.uniform(0.0, 1.0, size=(n, 2))
    labels = ((X[:, 0] > 0.5) ^ (X[:, 1] > 0.5)).astype(np.int64)
    return X, labels


def _convex_like(n: int, rng: np.random.Generator):
    labels = _balanced_labels(n, 2, rng)
    grid = np.arange(IMAGE_SIDE) + 0.5
    rows, cols = np.meshgrid(grid, grid, indexing="ij")

    images = np.zeros((n, IMAGE_SIDE, IMAGE_SIDE))
    for k, label in enumerate(labels):
        outer = rng.uniform(3.0, 5.0)
        cy, cx = rng.uniform(outer, IMAGE_SIDE - outer, size=2)
        distance = np.hypot(rows - cy, cols - cx)
        if label == 1:
            images[k] = distance <= outer
        else:
            inner = rng.uniform(1.2, outer - 1.2)
            images[k] = (distance <= outer) & (distance > inner)
    return images.reshape(n, -1), labels


_GENERATORS = {
    "blobs": _blobs,
    "xor": _xor,
    "convex-like": _convex_like,
}


def make_synthetic(kind: str, n: int, seed: int, partition: str = "train") -> Dataset:
    """
    Generate a synthetic two-class dataset.

    Args:
        kind: One of KINDS
        n: Number of samples (at least 2)
        seed: Generator seed; identical seeds give identical bytes
        partition: Partition name recorded on the dataset

    Returns:
        Dataset with inputs in [0, 1]
    """
    if kind not in _GENERATORS:
        raise DatasetError(f"Unknown synthetic kind {kind!r}; expected one of {KINDS}")
    if n < 2:
        raise DatasetError(f"Synthetic datasets need at least 2 samples, got {n}")

    rng = np.random.default_rng(seed)
    X, labels = _GENERATORS[kind](n, rng)
    dataset = Dataset(inputs=X, labels=labels, num_classes=2, name=kind, partition=partition)
    logger.debug(f"Generated {dataset} with seed {seed}")
    return dataset
