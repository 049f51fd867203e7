"""
Checkpoints
Binary save/load of whole networks: a versioned header followed by one
section per layer. Layer metadata is length-prefixed UTF-8 JSON; every array
is a length-prefixed run of little-endian 64-bit floats. Hash caches and
materialized matrices are never written, they are rebuilt from the seeds.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, BinaryIO, Dict, Optional, Union

import numpy as np

from compression.virtual_layer import VirtualLayer
from models.base_layer import BaseLayer
from models.dense_layer import DenseLayer
from models.network import Network

logger = logging.getLogger(__name__)

MAGIC = b"FHNN"
VERSION = 1

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")

LAYER_TYPES = {
    "dense": DenseLayer,
    "virtual": VirtualLayer,
}


class CheckpointError(ValueError):
    """Malformed or incompatible checkpoint file"""

    pass


def _write_bytes(stream: BinaryIO, payload: bytes):
    stream.write(_U64.pack(len(payload)))
    stream.write(payload)


def _read_exact(stream: BinaryIO, size: int) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise CheckpointError(f"Checkpoint truncated: wanted {size} bytes, got {len(data)}")
    return data


def _read_bytes(stream: BinaryIO) -> bytes:
    (size,) = _U64.unpack(_read_exact(stream, _U64.size))
    return _read_exact(stream, size)


def save_checkpoint(network: Network, path: Union[str, Path]):
    """
    Write a network to disk.

    Args:
        network: Network to save
        path: Output file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, "wb") as stream:
        stream.write(MAGIC)
        stream.write(_U32.pack(VERSION))
        _write_bytes(stream, json.dumps({"head": network.head}).encode("utf-8"))
        stream.write(_U32.pack(len(network.layers)))

        for layer in network.layers:
            _write_bytes(stream, json.dumps(layer.to_dict(), sort_keys=True).encode("utf-8"))
            params = layer.params()
            stream.write(_U32.pack(len(params)))
            for name, array in params.items():
                _write_bytes(stream, name.encode("utf-8"))
                _write_bytes(stream, np.ascontiguousarray(array, dtype="<f8").tobytes())

    logger.info(f"Saved checkpoint with {len(network.layers)} layers to {path}")


def _build_layer(spec: Dict[str, Any], config: Optional[Dict[str, Any]]) -> BaseLayer:
    kind = spec.get("kind")
    if kind not in LAYER_TYPES:
        raise CheckpointError(f"Unknown layer kind {kind!r} in checkpoint")
    return LAYER_TYPES[kind].from_dict(spec, config)


def load_checkpoint(path: Union[str, Path], config: Optional[Dict[str, Any]] = None) -> Network:
    """
    Read a network written by save_checkpoint().

    Args:
        path: Checkpoint file
        config: Runtime layer settings (budgets, workers) for the rebuilt layers

    Returns:
        Network with the stored parameters
    """
    with open(path, "rb") as stream:
        if _read_exact(stream, len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint file")
        (version,) = _U32.unpack(_read_exact(stream, _U32.size))
        if version != VERSION:
            raise CheckpointError(f"Unsupported checkpoint version {version}")

        header = json.loads(_read_bytes(stream).decode("utf-8"))
        (layer_count,) = _U32.unpack(_read_exact(stream, _U32.size))

        layers = []
        for _ in range(layer_count):
            spec = json.loads(_read_bytes(stream).decode("utf-8"))
            layer = _build_layer(spec, config)
            (param_count,) = _U32.unpack(_read_exact(stream, _U32.size))
            values = {}
            for _ in range(param_count):
                name = _read_bytes(stream).decode("utf-8")
                values[name] = np.frombuffer(_read_bytes(stream), dtype="<f8").astype(np.float64)
            shapes = {name: array.shape for name, array in layer.params().items()}
            layer.load_params(
                {name: value.reshape(shapes.get(name, value.shape)) for name, value in values.items()}
            )
            layers.append(layer)

    return Network(layers, head=header.get("head", "softmax"))
