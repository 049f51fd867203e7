# This file makes 'models' a Python package
from .base_layer import BaseLayer, LayerGrad
from .dense_layer import DenseLayer
from .network import Network, TargetRangeError

__all__ = [
    "BaseLayer",
    "LayerGrad",
    "DenseLayer",
    "Network",
    "TargetRangeError",
]
