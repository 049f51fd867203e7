# This file makes 'compression' a Python package
from .exceptions import ConfigurationError, DimensionMismatchError, ResourceError
from .hash_family import HashCache, HashFamily, HashPair, build_cache, hash_index, hash_sign
from .recon_net import ReconGrad, ReconNet

# virtual_layer and hash_kernel depend on models; import them by module path

__all__ = [
    "ConfigurationError",
    "DimensionMismatchError",
    "ResourceError",
    "HashCache",
    "HashFamily",
    "HashPair",
    "build_cache",
    "hash_index",
    "hash_sign",
    "ReconGrad",
    "ReconNet",
]
