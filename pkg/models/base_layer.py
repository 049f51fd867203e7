import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from compression.exceptions import DimensionMismatchError


@dataclass
class LayerGrad:
    """
    Gradients of the loss with respect to one layer.

    ``params`` is keyed exactly like the layer's params(); ``d_input`` is the
    derivative with respect to the layer's input activations.
    """

    params: Dict[str, np.ndarray] = field(default_factory=dict)
    d_input: Optional[np.ndarray] = None

    @property
    def d_w(self) -> Optional[np.ndarray]:
        return self.params.get("w")

    @property
    def d_alpha(self) -> Optional[np.ndarray]:
        return self.params.get("alpha")

    @property
    def d_b(self) -> Optional[np.ndarray]:
        return self.params.get("b")

    @property
    def d_w_dual(self) -> Optional[np.ndarray]:
        return self.params.get("w_dual")


class BaseLayer(ABC):
    """
    Abstract base class for all fully-connected layers.
    Dense and virtual (hashed) layers inherit from this class.
    """

    kind = "base"

    def __init__(self, d_in: int, d_out: int, config: Optional[Dict[str, Any]] = None):
        """
        Initialize the layer dimensions and settings.

        Args:
            d_in: Input dimensionality
            d_out: Output dimensionality
            config: Dictionary of runtime settings (budgets, workers)
        """
        if d_in < 1 or d_out < 1:
            raise DimensionMismatchError(f"Layer dims must be positive, got {d_in}->{d_out}")
        self.d_in = d_in
        self.d_out = d_out
        self.config = config or {}
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")

    @abstractmethod
    def params(self) -> Dict[str, np.ndarray]:
        """
        Trainable arrays stored by the layer.

        Returns:
            Ordered mapping from parameter name to the live array (updates
            made to the arrays change the layer)
        """
        pass

    @abstractmethod
    def forward(self, a: np.ndarray) -> Tuple[np.ndarray, Any]:
        """
        Compute pre-activations z = V a + b.

        Args:
            a: Input activations, shape (d_in,) or (batch, d_in)

        Returns:
            (z, ctx) where ctx can be handed back to backward()
        """
        pass

    @abstractmethod
    def backward(self, a: np.ndarray, delta: np.ndarray, ctx: Any = None) -> LayerGrad:
        """
        Gradients given the inputs and delta = dL/dz.

        Args:
            a: Inputs used in the forward pass
            delta: Derivative of the loss with respect to z
            ctx: Context returned by forward(), recomputed when missing

        Returns:
            LayerGrad keyed like params()
        """
        pass

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """Structural description sufficient to rebuild the layer."""
        pass

    def _as_batch(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        batch = a.reshape(1, -1) if a.ndim == 1 else a
        if batch.ndim != 2 or batch.shape[1] != self.d_in:
            raise DimensionMismatchError(
                f"{self.__class__.__name__} expects inputs of width {self.d_in}, "
                f"got shape {a.shape}"
            )
        return batch

    def load_params(self, values: Dict[str, np.ndarray]):
        """
        Overwrite stored parameters in place.

        Args:
            values: Mapping with exactly the keys of params()
        """
        current = self.params()
        if set(values) != set(current):
            raise DimensionMismatchError(
                f"Parameter names differ: expected {sorted(current)}, got {sorted(values)}"
            )
        for name, array in current.items():
            new = np.asarray(values[name], dtype=np.float64)
            if new.shape != array.shape:
                raise DimensionMismatchError(
                    f"Parameter {name} has shape {array.shape}, got {new.shape}"
                )
            array[...] = new

    def stored_parameter_count(self) -> int:
        """Number of trainable scalars the layer actually stores."""
        return int(sum(array.size for array in self.params().values()))

    def virtual_parameter_count(self) -> int:
        """Parameters of the equivalent uncompressed layer (weights + bias)."""
        return self.d_in * self.d_out + self.d_out

    def __repr__(self):
        return (
            f"<{self.__class__.__name__} {self.d_in}->{self.d_out} "
            f"stored={self.stored_parameter_count()}>"
        )
