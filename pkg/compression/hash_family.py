"""
Hash Families
Keyed MurmurHash families mapping virtual-matrix coordinates (i, j) to
compression-space buckets and sign factors.
"""

import logging
import struct
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence, Tuple, Union

import mmh3
import numpy as np

from compression.exceptions import ConfigurationError, ResourceError

logger = logging.getLogger(__name__)

_COORD = struct.Struct("<QQ")
_U64 = struct.Struct("<Q")
_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1

# Salts keep the index hash and the sign hash of one pair independent
INDEX_SALT = 0
SIGN_SALT = 1

DEFAULT_MAX_CACHE_ENTRIES = 64_000_000


def derive_seed(*parts: Union[int, str]) -> int:
    """
    Derive a 64-bit seed from a sequence of integers and labels.

    Args:
        *parts: Integers (taken modulo 2**64) or string labels

    Returns:
        Unsigned 64-bit seed, a pure function of the parts
    """
    chunks = []
    for part in parts:
        if isinstance(part, str):
            encoded = part.encode("utf-8")
            chunks.append(_U64.pack(len(encoded)) + encoded)
        else:
            chunks.append(_U64.pack(int(part) & _MASK64))
    return mmh3.hash64(b"".join(chunks), 0, True, signed=False)[0]


def _bucket(key: bytes, seed: int, K: int) -> int:
    return mmh3.hash64(key, seed, True, signed=False)[0] % K


def _sign(key: bytes, seed: int) -> int:
    # Top bit of a separately keyed 32-bit hash
    return 1 if mmh3.hash(key, seed, signed=False) >> 31 else -1


@dataclass(frozen=True)
class HashPair:
    """One (h_u, xi_u) pair: a bucket hash into [0, K) and a sign hash."""

    family_seed: int
    u: int
    K: int

    def __post_init__(self):
        if self.K < 1:
            raise ConfigurationError(f"Bucket count K must be >= 1, got {self.K}")
        if self.u < 1:
            raise ConfigurationError(f"Hash function index u is 1-based, got {self.u}")

    @cached_property
    def index_seed(self) -> int:
        return derive_seed(self.family_seed, self.u, INDEX_SALT) & _MASK32

    @cached_property
    def sign_seed(self) -> int:
        return derive_seed(self.family_seed, self.u, SIGN_SALT) & _MASK32


def hash_index(pair: HashPair, i: int, j: int) -> int:
    """
    Bucket of entry (i, j) under one hash pair.

    Args:
        pair: Hash pair to evaluate
        i: Row index (0-based)
        j: Column index (0-based)

    Returns:
        Bucket index in [0, K)
    """
    return _bucket(_COORD.pack(i, j), pair.index_seed, pair.K)


def hash_sign(pair: HashPair, i: int, j: int) -> int:
    """
    Sign factor of entry (i, j) under one hash pair.

    Returns:
        -1 or +1
    """
    return _sign(_COORD.pack(i, j), pair.sign_seed)


@dataclass(frozen=True)
class HashFamily:
    """
    Ordered family of U independent hash pairs sharing one bucket count.

    The order of the pairs is significant: it fixes the order of the inputs
    fed to the reconstruction network.
    """

    layer_seed: int
    U: int
    K: int

    def __post_init__(self):
        if self.U < 1:
            raise ConfigurationError(f"Hash family needs U >= 1, got {self.U}")
        if self.K < 1:
            raise ConfigurationError(f"Bucket count K must be >= 1, got {self.K}")

    @cached_property
    def pairs(self) -> Tuple[HashPair, ...]:
        return tuple(HashPair(self.layer_seed, u, self.K) for u in range(1, self.U + 1))

    def evaluate(self, i: int, j: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Online evaluation of all U pairs at a single entry.

        Returns:
            (indices, signs) arrays of length U
        """
        key = _COORD.pack(i, j)
        indices = np.array(
            [_bucket(key, p.index_seed, self.K) for p in self.pairs], dtype=np.int64
        )
        signs = np.array([_sign(key, p.sign_seed) for p in self.pairs], dtype=np.int8)
        return indices, signs

    def hash_rows(self, rows: Sequence[int], d_in: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Evaluate the family over a block of full rows of a virtual matrix.

        Args:
            rows: Row indices to hash
            d_in: Number of columns

        Returns:
            (indices, signs) arrays of shape (len(rows), d_in, U)
        """
        rows = list(rows)
        index_seeds = [p.index_seed for p in self.pairs]
        sign_seeds = [p.sign_seed for p in self.pairs]
        K = self.K
        pack = _COORD.pack
        hash64 = mmh3.hash64
        hash32 = mmh3.hash

        indices = np.empty((len(rows), d_in, self.U), dtype=np.int64)
        signs = np.empty((len(rows), d_in, self.U), dtype=np.int8)

        for r, i in enumerate(rows):
            keys = [pack(i, j) for j in range(d_in)]
            indices[r] = np.array(
                [hash64(k, s, True, signed=False)[0] % K for k in keys for s in index_seeds],
                dtype=np.int64,
            ).reshape(d_in, self.U)
            signs[r] = np.array(
                [1 if hash32(k, s, signed=False) >> 31 else -1 for k in keys for s in sign_seeds],
                dtype=np.int8,
            ).reshape(d_in, self.U)

        return indices, signs


@dataclass(frozen=True)
class HashCache:
    """Precomputed bucket indices and signs, row-major over (i, j)."""

    indices: np.ndarray
    signs: np.ndarray

    @property
    def d_out(self) -> int:
        return self.indices.shape[0]

    @property
    def d_in(self) -> int:
        return self.indices.shape[1]

    @property
    def U(self) -> int:
        return self.indices.shape[2]

    @property
    def nbytes(self) -> int:
        return self.indices.nbytes + self.signs.nbytes

    def rows(self, start: int, stop: int) -> Tuple[np.ndarray, np.ndarray]:
        return self.indices[start:stop], self.signs[start:stop]


def build_cache(
    family: HashFamily,
    d_out: int,
    d_in: int,
    max_entries: int = DEFAULT_MAX_CACHE_ENTRIES,
) -> HashCache:
    """
    Precompute every (index, sign) of a d_out x d_in virtual matrix.

    Args:
        family: Hash family to evaluate
        d_out: Number of rows
        d_in: Number of columns
        max_entries: Budget on d_out * d_in * U per array

    Returns:
        Read-only HashCache, bit-identical to online evaluation

    Raises:
        ConfigurationError: Non-positive dimensions
        ResourceError: The cache would exceed max_entries
    """
    if d_out < 1 or d_in < 1:
        raise ConfigurationError(f"Virtual dimensions must be positive, got {d_out}x{d_in}")

    entries = d_out * d_in * family.U
    if entries > max_entries:
        raise ResourceError(
            f"Hash cache of {entries} entries exceeds the budget of {max_entries}"
        )

    return _build_cache_cached(family, d_out, d_in)


@lru_cache(maxsize=32)
def _build_cache_cached(family: HashFamily, d_out: int, d_in: int) -> HashCache:
    logger.debug(
        f"Hashing {d_out}x{d_in} virtual matrix with U={family.U}, K={family.K}"
    )
    indices, signs = family.hash_rows(range(d_out), d_in)
    indices.flags.writeable = False
    signs.flags.writeable = False
    return HashCache(indices=indices, signs=signs)
