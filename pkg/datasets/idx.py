"""
IDX Reader/Writer
The MNIST container format: a big-endian magic (2051 for images, 2049 for
labels), one big-endian 32-bit size per dimension, then raw unsigned bytes.
Files ending in .gz are read and written through gzip.
"""

import gzip
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from datasets.dataset import Dataset, DatasetError, DatasetNotFoundError

logger = logging.getLogger(__name__)

LABEL_MAGIC = 2049
IMAGE_MAGIC = 2051

_DIMS_FOR_MAGIC = {LABEL_MAGIC: 1, IMAGE_MAGIC: 3}
_U32 = struct.Struct(">I")


class IdxMagicError(DatasetError):
    """Unknown IDX magic number"""

    pass


class IdxTruncatedError(DatasetError):
    """IDX file shorter than its header declares"""

    pass


class IdxCountMismatchError(DatasetError):
    """Image and label files hold different sample counts"""

    pass


@dataclass(frozen=True)
class IdxHeader:
    magic: int
    dims: Tuple[int, ...]

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def payload_size(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    @property
    def is_images(self) -> bool:
        return self.magic == IMAGE_MAGIC

    def to_bytes(self) -> bytes:
        return _U32.pack(self.magic) + b"".join(_U32.pack(size) for size in self.dims)


def _open(path: Path, mode: str):
    if path.suffix == ".gz":
        return gzip.open(path, mode)
    return open(path, mode)


def read_idx(path: Union[str, Path]) -> Tuple[IdxHeader, np.ndarray]:
    """
    Read one IDX file.

    Args:
        path: File path (.gz handled transparently)

    Returns:
        (header, uint8 array shaped by the header dims)
    """
    path = Path(path)
    if not path.exists():
        raise DatasetNotFoundError(f"IDX file not found: {path}")

    with _open(path, "rb") as stream:
        raw = stream.read()

    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: missing IDX magic")
    (magic,) = _U32.unpack_from(raw, 0)
    if magic not in _DIMS_FOR_MAGIC:
        raise IdxMagicError(
            f"{path}: magic {magic} is neither {IMAGE_MAGIC} (images) nor {LABEL_MAGIC} (labels)"
        )

    ndim = _DIMS_FOR_MAGIC[magic]
    offset = 4 + 4 * ndim
    if len(raw) < offset:
        raise IdxTruncatedError(f"{path}: header declares {ndim} dims but the file ends early")
    dims = tuple(_U32.unpack_from(raw, 4 + 4 * k)[0] for k in range(ndim))
    header = IdxHeader(magic=magic, dims=dims)

    payload = raw[offset:]
    if len(payload) < header.payload_size:
        raise IdxTruncatedError(
            f"{path}: expected {header.payload_size} data bytes, found {len(payload)}"
        )
    if len(payload) > header.payload_size:
        logger.warning(f"{path}: ignoring {len(payload) - header.payload_size} trailing bytes")

    data = np.frombuffer(payload, dtype=np.uint8, count=header.payload_size).reshape(dims)
    return header, data


def write_idx(path: Union[str, Path], data: np.ndarray):
    """
    Write a uint8 array as IDX: 1-D arrays as labels, 3-D arrays as images.
    """
    path = Path(path)
    data = np.asarray(data)
    magic = {1: LABEL_MAGIC, 3: IMAGE_MAGIC}.get(data.ndim)
    if magic is None:
        raise DatasetError(f"IDX data must be 1-D labels or 3-D images, got {data.ndim}-D")
    if data.dtype != np.uint8:
        if data.size and (data.min() < 0 or data.max() > 255):
            raise DatasetError("IDX data must fit in unsigned bytes")
        data = data.astype(np.uint8)

    header = IdxHeader(magic=magic, dims=tuple(int(size) for size in data.shape))
    path.parent.mkdir(parents=True, exist_ok=True)
    with _open(path, "wb") as stream:
        stream.write(header.to_bytes())
        stream.write(np.ascontiguousarray(data).tobytes())


def load_idx(
    image_path: Union[str, Path],
    label_path: Union[str, Path],
    num_classes: int = 10,
    name: str = "mnist",
    partition: str = "train",
) -> Dataset:
    """
    Load an image/label IDX pair as a Dataset with pixels scaled to [0, 1].

    Raises:
        IdxMagicError, IdxTruncatedError: Malformed file
        IdxCountMismatchError: Image and label counts differ
        LabelRangeError: A label is not below num_classes
    """
    image_header, images = read_idx(image_path)
    label_header, labels = read_idx(label_path)

    if not image_header.is_images:
        raise IdxMagicError(f"{image_path} holds labels, expected images")
    if label_header.is_images:
        raise IdxMagicError(f"{label_path} holds images, expected labels")
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{images.shape[0]} images in {image_path} but {labels.shape[0]} labels in {label_path}"
        )

    inputs = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    dataset = Dataset(
        inputs=inputs,
        labels=labels.astype(np.int64),
        num_classes=num_classes,
        name=name,
        partition=partition,
    )
    logger.info(f"Loaded {dataset} from {image_path}")
    return dataset
