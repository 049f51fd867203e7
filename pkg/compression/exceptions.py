"""
Exceptions shared by the compression layers.
"""


class ConfigurationError(ValueError):
    """Invalid layer, hash or reconstruction-network configuration"""

    pass


class ResourceError(MemoryError):
    """A cache, scratch or enumeration request exceeds its configured budget"""

    pass


class DimensionMismatchError(ValueError):
    """Array shapes do not match the layer or network they are fed to"""

    pass
