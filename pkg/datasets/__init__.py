# This file makes 'datasets' a Python package
from .dataset import (
    Dataset,
    DatasetError,
    DatasetNotFoundError,
    LabelRangeError,
    split,
    split_indices,
)
from .flat import FlatFormatError, load_flat, read_flat
from .idx import (
    IdxCountMismatchError,
    IdxHeader,
    IdxMagicError,
    IdxTruncatedError,
    load_idx,
    read_idx,
    write_idx,
)
from .loader import DataBundle, load_data, mnist_available
from .synthetic import make_synthetic

__all__ = [
    "Dataset",
    "DatasetError",
    "DatasetNotFoundError",
    "LabelRangeError",
    "split",
    "split_indices",
    "FlatFormatError",
    "load_flat",
    "read_flat",
    "IdxCountMismatchError",
    "IdxHeader",
    "IdxMagicError",
    "IdxTruncatedError",
    "load_idx",
    "read_idx",
    "write_idx",
    "DataBundle",
    "load_data",
    "mnist_available",
    "make_synthetic",
]
