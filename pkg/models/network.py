"""
Network
Stacked fully-connected network mixing dense and virtual layers, with ReLU
hidden activations and a softmax/cross-entropy or identity/squared-loss head.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from compression.exceptions import ConfigurationError, DimensionMismatchError
from models.base_layer import BaseLayer, LayerGrad

HEADS = ("softmax", "squared")

# Clamp for log(p) in the cross-entropy
EPSILON = 1e-12


class TargetRangeError(ValueError):
    """Class targets outside [0, C)"""

    pass


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    shifted = z - z.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean of -log p[label] over the batch, log clamped at EPSILON."""
    picked = probs[np.arange(labels.shape[0]), labels]
    return float(-np.mean(np.log(np.maximum(picked, EPSILON))))


def squared_loss(outputs: np.ndarray, targets: np.ndarray) -> float:
    """Mean over the batch of the summed squared error."""
    return float(np.mean(np.sum((outputs - targets) ** 2, axis=-1)))


@dataclass
class NetworkTrace:
    """Everything net_forward retains for the backward pass."""

    inputs: List[np.ndarray] = field(default_factory=list)
    pre_activations: List[np.ndarray] = field(default_factory=list)
    contexts: List[Any] = field(default_factory=list)
    outputs: Optional[np.ndarray] = None


class Network:
    """
    Feed-forward network a^{l+1} = f(V^l a^l + b^l).
    """

    def __init__(self, layers: List[BaseLayer], head: str = "softmax"):
        """
        Initialize the network.

        Args:
            layers: Ordered layers; adjacent dims must match
            head: "softmax" (cross-entropy) or "squared" (identity output)
        """
        if not layers:
            raise ConfigurationError("A network needs at least one layer")
        if head not in HEADS:
            raise ConfigurationError(f"Unknown output head {head!r}; expected one of {HEADS}")
        for lower, upper in zip(layers, layers[1:]):
            if lower.d_out != upper.d_in:
                raise DimensionMismatchError(
                    f"Layer output {lower.d_out} does not feed layer input {upper.d_in}"
                )

        self.layers = layers
        self.head = head
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")
        self.last_trace: Optional[NetworkTrace] = None

    @property
    def d_in(self) -> int:
        return self.layers[0].d_in

    @property
    def num_outputs(self) -> int:
        return self.layers[-1].d_out

    def forward(self, X: np.ndarray) -> NetworkTrace:
        """
        Run every layer, applying ReLU between layers and the head at the end.

        Args:
            X: Inputs of shape (batch, d_in)

        Returns:
            NetworkTrace with per-layer inputs, pre-activations and outputs
        """
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.d_in:
            raise DimensionMismatchError(
                f"Network expects inputs of shape (batch, {self.d_in}), got {X.shape}"
            )

        trace = NetworkTrace()
        a = X
        last = len(self.layers) - 1
        for position, layer in enumerate(self.layers):
            z, ctx = layer.forward(a)
            trace.inputs.append(a)
            trace.pre_activations.append(z)
            trace.contexts.append(ctx)
            if position < last:
                a = relu(z)

        z = trace.pre_activations[-1]
        trace.outputs = softmax(z) if self.head == "softmax" else z
        self.last_trace = trace
        return trace

    def _check_targets(self, outputs: np.ndarray, targets: np.ndarray) -> np.ndarray:
        if outputs.shape[0] == 0:
            raise ValueError("Loss of an empty batch is undefined")
        if self.head == "softmax":
            targets = np.asarray(targets)
            if targets.shape != (outputs.shape[0],):
                raise DimensionMismatchError(
                    f"Expected {outputs.shape[0]} class targets, got shape {targets.shape}"
                )
            if targets.min() < 0 or targets.max() >= outputs.shape[1]:
                raise TargetRangeError(
                    f"Targets must lie in [0, {outputs.shape[1]}), "
                    f"got [{targets.min()}, {targets.max()}]"
                )
            return targets.astype(np.int64)

        targets = np.asarray(targets, dtype=np.float64)
        if targets.shape != outputs.shape:
            raise DimensionMismatchError(
                f"Targets of shape {targets.shape} do not match outputs {outputs.shape}"
            )
        return targets

    def loss(self, outputs: np.ndarray, targets: np.ndarray) -> float:
        """Mean loss of the head over the batch."""
        targets = self._check_targets(outputs, targets)
        if self.head == "softmax":
            return cross_entropy(outputs, targets)
        return squared_loss(outputs, targets)

    def output_delta(self, outputs: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """dL/dz at the output layer (probabilities - one-hot, or 2(z - t)), over batch."""
        targets = self._check_targets(outputs, targets)
        batch = outputs.shape[0]
        if self.head == "softmax":
            delta = outputs.copy()
            delta[np.arange(batch), targets] -= 1.0
            return delta / batch
        return 2.0 * (outputs - targets) / batch

    def backward(self, targets: np.ndarray, trace: Optional[NetworkTrace] = None) -> List[LayerGrad]:
        """
        Back-propagate the loss through every layer.

        Args:
            targets: Class indices (softmax head) or target matrix (squared head)
            trace: Forward trace; defaults to the last forward pass

        Returns:
            One LayerGrad per layer, in layer order
        """
        trace = trace or self.last_trace
        if trace is None:
            raise RuntimeError("backward() needs a forward pass first")

        delta = self.output_delta(trace.outputs, targets)
        grads: List[LayerGrad] = [None] * len(self.layers)
        for position in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[position]
            grad = layer.backward(trace.inputs[position], delta, trace.contexts[position])
            grads[position] = grad
            if position > 0:
                delta = grad.d_input * (trace.pre_activations[position - 1] > 0)
        return grads

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.forward(X).outputs, axis=1)

    def params(self) -> List[Dict[str, np.ndarray]]:
        return [layer.params() for layer in self.layers]

    def parameter_count(self) -> int:
        """Stored trainable scalars over all layers."""
        return sum(layer.stored_parameter_count() for layer in self.layers)

    def virtual_parameter_count(self) -> int:
        """Parameters of the equivalent uncompressed network."""
        return sum(layer.virtual_parameter_count() for layer in self.layers)

    def accounting(self) -> List[Dict[str, Any]]:
        """Per-layer parameter report."""
        return [
            {
                "layer": position,
                "kind": layer.kind,
                "mode": getattr(layer, "mode", "dense"),
                "d_in": layer.d_in,
                "d_out": layer.d_out,
                "stored": layer.stored_parameter_count(),
                "virtual": layer.virtual_parameter_count(),
            }
            for position, layer in enumerate(self.layers)
        ]

    def __repr__(self):
        dims = "-".join([str(self.d_in)] + [str(layer.d_out) for layer in self.layers])
        return f"<Network {dims} head={self.head} stored={self.parameter_count()}>"
