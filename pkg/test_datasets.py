"""
Tests for datasets: validation, splits, the IDX format and synthetic generators
"""

import gzip
import logging
import struct

import numpy as np
import pytest

from datasets import (
    Dataset,
    DatasetError,
    DatasetNotFoundError,
    FlatFormatError,
    IdxCountMismatchError,
    IdxMagicError,
    IdxTruncatedError,
    LabelRangeError,
    load_data,
    load_flat,
    load_idx,
    make_synthetic,
    mnist_available,
    read_idx,
    split,
    split_indices,
    write_idx,
)
from datasets.loader import MNIST_FILES
from datasets.synthetic import IMAGE_SIDE, KINDS

# ----------------------------------------------------------------------
# Dataset


def test_dataset_freezes_arrays():
    dataset = Dataset(np.array([[0.0, 1.0], [0.5, 0.5]]), np.array([1, 0]), num_classes=2)
    assert len(dataset) == 2 and dataset.num_features == 2
    with pytest.raises(ValueError):
        dataset.inputs[0, 0] = 1.0
    with pytest.raises(ValueError):
        dataset.labels[0] = 0


@pytest.mark.parametrize(
    "inputs, labels, error",
    [
        (np.zeros((0, 2)), np.zeros(0, dtype=int), DatasetError),
        (np.zeros(3), np.zeros(3, dtype=int), DatasetError),
        (np.zeros((3, 2)), np.zeros(2, dtype=int), DatasetError),
        (np.full((2, 2), 1.5), np.zeros(2, dtype=int), DatasetError),
        (np.array([[np.nan, 0.0]]), np.zeros(1, dtype=int), DatasetError),
        (np.zeros((2, 2)), np.array([0, 2]), LabelRangeError),
        (np.zeros((2, 2)), np.array([-1, 0]), LabelRangeError),
    ],
)
def test_dataset_validation(inputs, labels, error):
    with pytest.raises(error):
        Dataset(inputs, labels, num_classes=2)


def test_one_hot_and_class_counts():
    dataset = Dataset(np.zeros((4, 1)), np.array([0, 2, 2, 1]), num_classes=3)
    np.testing.assert_array_equal(dataset.one_hot()[1], [0.0, 0.0, 1.0])
    np.testing.assert_array_equal(dataset.class_counts(), [1, 1, 2])


def test_head_and_subset():
    dataset = make_synthetic("xor", 10, seed=0)
    assert dataset.head(None) is dataset
    assert dataset.head(100) is dataset
    head = dataset.head(4)
    np.testing.assert_array_equal(head.inputs, dataset.inputs[:4])
    subset = dataset.subset([3, 1], partition="validation")
    assert subset.partition == "validation"
    np.testing.assert_array_equal(subset.labels, dataset.labels[[3, 1]])


# ----------------------------------------------------------------------
# splits


def test_split_indices_partition_all_samples():
    train, validation = split_indices(50, 0.2, seed=3)
    assert len(validation) == 10 and len(train) == 40
    assert set(train).isdisjoint(validation)
    assert sorted(np.concatenate([train, validation])) == list(range(50))


def test_split_is_deterministic():
    first = split_indices(30, 0.3, seed=5)
    second = split_indices(30, 0.3, seed=5)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("n, fraction", [(10, 0.0), (10, 1.0), (10, 0.01), (3, 0.9)])
def test_split_rejects_empty_parts(n, fraction):
    with pytest.raises(DatasetError):
        split_indices(n, fraction, seed=0)


def test_split_dataset_names_partitions():
    train, validation = split(make_synthetic("blobs", 20, seed=1), 0.25, seed=0)
    assert (train.partition, validation.partition) == ("train", "validation")
    assert (len(train), len(validation)) == (15, 5)


# ----------------------------------------------------------------------
# IDX


def test_idx_round_trip(tmp_path):
    images = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
    write_idx(tmp_path / "images", images)
    header, data = read_idx(tmp_path / "images")
    assert header.magic == 2051 and header.dims == (2, 3, 4)
    np.testing.assert_array_equal(data, images)


def test_idx_gzip(tmp_path):
    labels = np.array([3, 1, 4, 1, 5], dtype=np.uint8)
    write_idx(tmp_path / "labels.gz", labels)
    with gzip.open(tmp_path / "labels.gz", "rb") as stream:
        assert struct.unpack(">I", stream.read(4)) == (2049,)
    header, data = read_idx(tmp_path / "labels.gz")
    assert not header.is_images
    np.testing.assert_array_equal(data, labels)


def test_idx_bad_magic(tmp_path):
    path = tmp_path / "bad"
    path.write_bytes(struct.pack(">II", 2050, 1) + b"\x00")
    with pytest.raises(IdxMagicError):
        read_idx(path)


def test_idx_truncated(tmp_path):
    path = tmp_path / "short"
    path.write_bytes(struct.pack(">II", 2049, 10) + b"\x00" * 4)
    with pytest.raises(IdxTruncatedError):
        read_idx(path)
    path.write_bytes(struct.pack(">I", 2051) + b"\x00\x00")
    with pytest.raises(IdxTruncatedError):
        read_idx(path)


def test_idx_trailing_bytes_warn(tmp_path, caplog):
    path = tmp_path / "long"
    path.write_bytes(struct.pack(">II", 2049, 2) + b"\x01\x02\x03")
    with caplog.at_level(logging.WARNING, logger="datasets.idx"):
        _, data = read_idx(path)
    np.testing.assert_array_equal(data, [1, 2])
    assert "trailing" in caplog.text


def test_idx_missing_file(tmp_path):
    with pytest.raises(DatasetNotFoundError):
        read_idx(tmp_path / "absent")


def test_write_idx_rejects_other_ranks(tmp_path):
    with pytest.raises(DatasetError):
        write_idx(tmp_path / "x", np.zeros((2, 2), dtype=np.uint8))


def test_load_idx_scales_pixels(idx_dir):
    dataset = load_idx(
        idx_dir / MNIST_FILES["train_images"], idx_dir / MNIST_FILES["train_labels"]
    )
    assert dataset.inputs.shape == (60, 16)
    _, raw = read_idx(idx_dir / MNIST_FILES["train_images"])
    np.testing.assert_allclose(dataset.inputs, raw.reshape(60, 16) / 255.0)


def test_load_idx_count_mismatch(idx_dir):
    with pytest.raises(IdxCountMismatchError):
        load_idx(idx_dir / MNIST_FILES["train_images"], idx_dir / MNIST_FILES["test_labels"])


def test_load_idx_label_range(idx_dir):
    with pytest.raises(LabelRangeError):
        load_idx(
            idx_dir / MNIST_FILES["train_images"],
            idx_dir / MNIST_FILES["train_labels"],
            num_classes=5,
        )


def test_load_idx_swapped_files(idx_dir):
    with pytest.raises(IdxMagicError):
        load_idx(idx_dir / MNIST_FILES["train_labels"], idx_dir / MNIST_FILES["train_labels"])


# ----------------------------------------------------------------------
# loader


def test_load_data_from_idx_directory(idx_dir):
    assert mnist_available(idx_dir)
    bundle = load_data("mnist", data_dir=idx_dir, train_size=50, test_size=10, validation_fraction=0.2)
    assert (len(bundle.train), len(bundle.validation), len(bundle.test)) == (40, 10, 10)


def test_load_data_accepts_gzipped_files(idx_dir, tmp_path):
    packed = tmp_path / "packed"
    for stem in MNIST_FILES.values():
        _, data = read_idx(idx_dir / stem)
        write_idx(packed / f"{stem}.gz", data)
    bundle = load_data("idx", data_dir=tmp_path, path="packed")
    assert len(bundle.train) == 60 and bundle.validation is None


def test_load_data_missing_directory(tmp_path):
    assert not mnist_available(tmp_path / "nowhere")
    with pytest.raises(DatasetNotFoundError):
        load_data("mnist", data_dir=tmp_path, path="nowhere")


def test_load_data_missing_file(idx_dir):
    (idx_dir / MNIST_FILES["test_labels"]).unlink()
    assert not mnist_available(idx_dir)
    with pytest.raises(DatasetNotFoundError):
        load_data("mnist", data_dir=idx_dir)


def write_flat(path, rows):
    path.write_text("\n".join(" ".join(str(value) for value in row) for row in rows) + "\n")
    return path


def test_load_flat_splits_features_and_label(tmp_path):
    path = write_flat(tmp_path / "convex_train.amat", [[0.0, 1.0, 0.5, 1], [0.25, 0.0, 1.0, 0]])
    dataset = load_flat(path, num_classes=2, name="convex")
    np.testing.assert_array_equal(dataset.inputs, [[0.0, 1.0, 0.5], [0.25, 0.0, 1.0]])
    np.testing.assert_array_equal(dataset.labels, [1, 0])


@pytest.mark.parametrize(
    "rows, error",
    [
        ([[0.5, 0.5, 1], [0.5, 1]], FlatFormatError),
        ([[0.5, 0.5, 1.5]], FlatFormatError),
        ([[0.5, 0.5, 3]], LabelRangeError),
        ([[0.5, 2.0, 1]], DatasetError),
    ],
)
def test_load_flat_rejects_malformed_rows(tmp_path, rows, error):
    with pytest.raises(error):
        load_flat(write_flat(tmp_path / "bad_train.amat", rows), num_classes=2)


def test_load_data_from_flat_directory(tmp_path):
    root = tmp_path / "convex"
    root.mkdir()
    write_flat(root / "convex_train.amat", [[0.1, 0.9, 1], [0.8, 0.2, 0], [0.4, 0.4, 1]])
    with gzip.open(root / "convex_test.amat.gz", "wt") as handle:
        handle.write("0.3 0.7 0\n")
    bundle = load_data("flat", tmp_path, "convex", num_classes=2, train_size=2)
    assert (len(bundle.train), len(bundle.test)) == (2, 1)
    assert bundle.test.name == "convex"


def test_load_data_flat_needs_one_file_per_partition(tmp_path):
    write_flat(tmp_path / "a_train.amat", [[0.1, 1]])
    write_flat(tmp_path / "b_train.amat", [[0.1, 1]])
    with pytest.raises(DatasetNotFoundError):
        load_data("flat", tmp_path, num_classes=2)


def test_load_data_unknown_source():
    with pytest.raises(DatasetError):
        load_data("cifar")


def test_load_synthetic_bundle():
    bundle = load_data("synthetic", kind="xor", train_size=30, test_size=12, seed=4)
    assert (len(bundle.train), len(bundle.test)) == (30, 12)
    assert bundle.test.partition == "test"


# ----------------------------------------------------------------------
# synthetic


@pytest.mark.parametrize("kind", KINDS)
def test_synthetic_is_deterministic(kind):
    first = make_synthetic(kind, 40, seed=9)
    second = make_synthetic(kind, 40, seed=9)
    assert first.inputs.tobytes() == second.inputs.tobytes()
    assert first.labels.tobytes() == second.labels.tobytes()
    assert first.inputs.min() >= 0.0 and first.inputs.max() <= 1.0
    assert set(np.unique(first.labels)) <= {0, 1}


def test_synthetic_seeds_differ():
    assert not np.array_equal(make_synthetic("blobs", 20, 0).inputs, make_synthetic("blobs", 20, 1).inputs)


def test_xor_labels_follow_quadrants():
    dataset = make_synthetic("xor", 200, seed=2)
    expected = (dataset.inputs[:, 0] > 0.5) ^ (dataset.inputs[:, 1] > 0.5)
    np.testing.assert_array_equal(dataset.labels, expected.astype(int))


def test_convex_like_images():
    dataset = make_synthetic("convex-like", 10, seed=0)
    assert dataset.num_features == IMAGE_SIDE * IMAGE_SIDE
    np.testing.assert_array_equal(dataset.class_counts(), [5, 5])


def least_squares_error(dataset):
    design = np.hstack([dataset.inputs, np.ones((len(dataset), 1))])
    targets = 2.0 * dataset.labels - 1.0
    coef, *_ = np.linalg.lstsq(design, targets, rcond=None)
    return float(np.mean((design @ coef > 0) != dataset.labels))


def test_blobs_are_linearly_separable_and_xor_is_not():
    assert least_squares_error(make_synthetic("blobs", 1000, seed=3)) < 0.05
    assert least_squares_error(make_synthetic("xor", 1000, seed=3)) >= 0.25


@pytest.mark.parametrize("kind, n", [("spirals", 10), ("blobs", 1)])
def test_synthetic_rejects_bad_requests(kind, n):
    with pytest.raises(DatasetError):
        make_synthetic(kind, n, seed=0)
