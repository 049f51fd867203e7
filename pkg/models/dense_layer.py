import math
from typing import Any, Dict, Optional, Tuple

import numpy as np

from models.base_layer import BaseLayer, LayerGrad


class DenseLayer(BaseLayer):
    """Standard fully-connected layer, the uncompressed baseline"""

    kind = "dense"

    def __init__(
        self,
        d_in: int,
        d_out: int,
        seed: int = 0,
        config: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(d_in, d_out, config)
        self.seed = seed
        rng = np.random.default_rng(seed)
        limit = math.sqrt(6.0 / (d_in + d_out))
        self.weight = rng.uniform(-limit, limit, size=(d_out, d_in))
        self.b = np.zeros(d_out)

    def params(self) -> Dict[str, np.ndarray]:
        return {"weight": self.weight, "b": self.b}

    def forward(self, a: np.ndarray) -> Tuple[np.ndarray, None]:
        batch = self._as_batch(a)
        z = batch @ self.weight.T + self.b
        return (z[0] if np.asarray(a).ndim == 1 else z), None

    def backward(self, a: np.ndarray, delta: np.ndarray, ctx: Any = None) -> LayerGrad:
        batch = self._as_batch(a)
        delta = np.asarray(delta, dtype=np.float64).reshape(batch.shape[0], self.d_out)
        d_input = delta @ self.weight
        if np.asarray(a).ndim == 1:
            d_input = d_input[0]
        return LayerGrad(
            params={"weight": delta.T @ batch, "b": delta.sum(axis=0)},
            d_input=d_input,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "d_in": self.d_in, "d_out": self.d_out, "seed": self.seed}

    @classmethod
    def from_dict(cls, spec: Dict[str, Any], config: Optional[Dict[str, Any]] = None):
        return cls(spec["d_in"], spec["d_out"], seed=spec.get("seed", 0), config=config)
