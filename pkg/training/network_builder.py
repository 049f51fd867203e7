"""
Network Builder
Turns one grid cell (RunSpec) into a Network: layer widths from the topology
and the compression regime, K per layer from the ratio, and independent hash
and init seeds derived from the run's master seed.
"""

import logging
from typing import Any, Dict, List, Optional, Tuple

from compression.hash_family import derive_seed
from compression.virtual_layer import VirtualLayer
from models.base_layer import BaseLayer
from models.dense_layer import DenseLayer
from models.network import Network
from training.experiment_config import RunSpec

logger = logging.getLogger(__name__)


def layer_dims(input_dim: int, hidden: int, hidden_layers: int, num_classes: int) -> List[Tuple[int, int]]:
    """(d_in, d_out) of every weight layer."""
    widths = [input_dim] + [hidden] * hidden_layers + [num_classes]
    return list(zip(widths, widths[1:]))


def dense_parameter_count(dims: List[Tuple[int, int]]) -> int:
    """Weights and biases of a fully-connected stack."""
    return sum(d_in * d_out + d_out for d_in, d_out in dims)


def hidden_width(run: RunSpec, input_dim: int, num_classes: int) -> int:
    """
    Hidden width of a run.

    Fixed-memory grows the width to round(h0 / ratio) so that K stays at its
    ratio-1 value. In fixed-virtual, compressed runs keep h0 while a dense run
    shrinks to the width whose stored count is closest to ratio times the
    virtual count of the h0 network.
    """
    topology = run.experiment.network
    base = topology.hidden
    if run.experiment.compression.regime == "fixed-memory":
        return max(1, round(base / run.ratio))
    if run.mode != "dense" or run.ratio >= 1.0:
        return base

    depth = topology.hidden_layers()
    target = run.ratio * dense_parameter_count(layer_dims(input_dim, base, depth, num_classes))
    return min(
        range(1, base + 1),
        key=lambda width: abs(dense_parameter_count(layer_dims(input_dim, width, depth, num_classes)) - target),
    )


def compression_sizes(run: RunSpec, input_dim: int, num_classes: int) -> List[int]:
    """K of every layer of a run."""
    topology = run.experiment.network
    dims = layer_dims(input_dim, topology.hidden, topology.hidden_layers(), num_classes)
    if run.experiment.compression.regime == "fixed-memory":
        return [d_in * d_out for d_in, d_out in dims]
    return [max(1, round(run.ratio * d_in * d_out)) for d_in, d_out in dims]


def run_seeds(run: RunSpec) -> Dict[str, int]:
    """Independent master seeds for the hash layout, the init and the data order."""
    hash_master = run.experiment.run.hash_seed
    return {
        "hash": derive_seed(run.seed if hash_master is None else hash_master, "hash"),
        "init": derive_seed(run.seed, "init"),
        "shuffle": derive_seed(run.seed, "shuffle") & 0xFFFFFFFF,
    }


def build_network(
    run: RunSpec,
    input_dim: int,
    num_classes: int,
    layer_config: Optional[Dict[str, Any]] = None,
) -> Network:
    """
    Build the network of one run.

    Args:
        run: Grid cell to build
        input_dim: Feature count of the data
        num_classes: Output width
        layer_config: Runtime layer settings (budgets, workers)

    Returns:
        Freshly initialized Network
    """
    topology = run.experiment.network
    compression = run.experiment.compression
    width = hidden_width(run, input_dim, num_classes)
    dims = layer_dims(input_dim, width, topology.hidden_layers(), num_classes)
    sizes = compression_sizes(run, input_dim, num_classes)
    seeds = run_seeds(run)

    layers: List[BaseLayer] = []
    for position, ((d_in, d_out), K) in enumerate(zip(dims, sizes)):
        init_seed = derive_seed(seeds["init"], position)
        if run.mode == "dense":
            layer = DenseLayer(d_in, d_out, seed=init_seed, config=layer_config)
        else:
            layer = VirtualLayer(
                d_in,
                d_out,
                K=K,
                mode=run.layer_mode,
                U=run.U,
                G=run.G or 3,
                hops=run.hops,
                dual_k=compression.dual_k,
                seed=derive_seed(seeds["hash"], position),
                init_seed=init_seed,
                hash_mode=compression.hash_mode or (layer_config or {}).get("hash_mode", "cached"),
                config=layer_config,
            )
            alphas = layer.recon.num_params if layer.recon is not None else 0
            logger.info(
                f"Layer {position}: {d_in}->{d_out} {layer.mode} K={K} "
                f"ratio={layer.compression_ratio:.5f} alpha={alphas} stored={layer.stored_parameter_count()}"
            )
        layers.append(layer)

    return Network(layers, head=topology.head)
