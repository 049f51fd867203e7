"""
Gradient Check
Central finite differences against the analytic backward passes of
reconstruction networks, single layers and whole networks.
"""

import logging
from typing import Callable, Dict, Optional

import numpy as np

from compression.recon_net import ReconNet
from models.base_layer import BaseLayer
from models.network import Network

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5

# Entries whose magnitudes are both below the floor are compared absolutely
DEFAULT_FLOOR = 1e-4


def numerical_gradient(fn: Callable[[], float], array: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """
    Central differences of fn() with respect to every entry of array.

    array is perturbed in place and restored exactly after each perturbation.
    """
    grad = np.zeros(array.shape)
    flat = array.reshape(-1)
    for k in range(flat.size):
        original = flat[k]
        flat[k] = original + step
        upper = fn()
        flat[k] = original - step
        lower = fn()
        flat[k] = original
        grad.reshape(-1)[k] = (upper - lower) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = DEFAULT_FLOOR) -> float:
    """max_k |a_k - n_k| / max(|a_k|, |n_k|, floor)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))


def check_recon_gradients(
    recon: ReconNet,
    x: np.ndarray,
    upstream: float = 1.0,
    step: float = DEFAULT_STEP,
) -> Dict[str, float]:
    """Relative errors of upstream * dg/dx and upstream * dg/dalpha."""
    x = np.array(x, dtype=np.float64)
    grad = recon.backward(x, upstream)

    def value() -> float:
        return upstream * recon.forward(x)

    return {
        "input": relative_error(grad.d_input, numerical_gradient(value, x, step)),
        "alpha": relative_error(grad.d_alpha, numerical_gradient(value, recon.alpha, step)),
    }


def check_layer_gradients(
    layer: BaseLayer,
    a: np.ndarray,
    rng: Optional[np.random.Generator] = None,
    step: float = DEFAULT_STEP,
) -> Dict[str, float]:
    """
    Compare layer.backward() with finite differences of L = sum(R * z).

    R is a fixed random matrix, so delta = R.

    Returns:
        Relative error per parameter name, plus "input"
    """
    rng = rng or np.random.default_rng(0)
    a = np.array(a, dtype=np.float64)
    z, ctx = layer.forward(a)
    weights = rng.standard_normal(z.shape)
    grad = layer.backward(a, weights, ctx)

    def loss() -> float:
        return float(np.sum(weights * layer.forward(a)[0]))

    errors = {
        name: relative_error(grad.params[name], numerical_gradient(loss, array, step))
        for name, array in layer.params().items()
    }
    errors["input"] = relative_error(grad.d_input, numerical_gradient(loss, a, step))
    return errors


def check_network_gradients(
    network: Network,
    X: np.ndarray,
    targets: np.ndarray,
    step: float = DEFAULT_STEP,
) -> Dict[str, float]:
    """
    Compare Network.backward() with finite differences of the mean loss.

    Returns:
        Relative error keyed "layer<k>.<param>"
    """
    X = np.asarray(X, dtype=np.float64)
    trace = network.forward(X)
    grads = network.backward(targets, trace)

    def loss() -> float:
        return network.loss(network.forward(X).outputs, targets)

    errors = {}
    for position, (layer, grad) in enumerate(zip(network.layers, grads)):
        for name, array in layer.params().items():
            numeric = numerical_gradient(loss, array, step)
            errors[f"layer{position}.{name}"] = relative_error(grad.params[name], numeric)
    logger.debug(f"Network gradient errors: {errors}")
    return errors
