"""
Hash Kernel
Feature-hashing oracles: the hashing trick, Monte-Carlo verification of the
unbiased hash kernel, and the two inner-product reformulations of a virtual
layer used as exact cross-checks of VirtualLayer.forward().
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from compression.exceptions import ConfigurationError, ResourceError
from compression.hash_family import (
    HashFamily,
    HashPair,
    derive_seed,
    hash_index,
    hash_sign,
)
from compression.virtual_layer import VirtualLayer

logger = logging.getLogger(__name__)

DEFAULT_ENUMERATION_CAP = 4096


@dataclass
class HashedFeature:
    """A hashed representation of length K (or of an enumerated bin space)."""

    K: int
    values: np.ndarray


@dataclass
class LemmaReport:
    """Monte-Carlo estimate of the hash kernel's bias and variance."""

    n: int
    K: int
    trials: int
    exact_inner_product: float
    bias: float
    standard_error: float
    empirical_variance: float
    formula_variance: float

    @property
    def bias_ok(self) -> bool:
        return abs(self.bias) < 4.0 * self.standard_error

    @property
    def variance_relative_error(self) -> float:
        return abs(self.empirical_variance - self.formula_variance) / self.formula_variance

    @property
    def variance_ok(self) -> bool:
        return self.variance_relative_error < 0.10

    @property
    def passed(self) -> bool:
        return self.bias_ok and self.variance_ok

    def to_dict(self) -> Dict[str, float]:
        row = asdict(self)
        row["variance_relative_error"] = self.variance_relative_error
        row["passed"] = self.passed
        return row


def feature_hash(x: np.ndarray, h: np.ndarray, xi: np.ndarray, K: int) -> HashedFeature:
    """
    Hashing trick: bucket j accumulates xi(i) * x_i over {i : h(i) = j}.

    Args:
        x: Input vector of length n
        h: Bucket of every coordinate, values in [0, K)
        xi: Sign of every coordinate
        K: Output dimension

    Returns:
        HashedFeature of length K
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ConfigurationError("feature_hash needs a non-empty vector")
    h = np.asarray(h, dtype=np.int64)
    if h.size and (h.min() < 0 or h.max() >= K):
        raise ConfigurationError(f"Bucket table has entries outside [0, {K})")
    values = np.bincount(h, weights=np.asarray(xi, dtype=np.float64) * x, minlength=K)
    return HashedFeature(K=K, values=values)


def hash_tables(n: int, K: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Bucket and sign tables for coordinates 0..n-1 from one hash pair."""
    indices, signs = HashFamily(seed, 1, K).hash_rows(range(n), 1)
    return indices[:, 0, 0], signs[:, 0, 0]


def lemma_variance(x: np.ndarray, y: np.ndarray, K: int) -> float:
    """Closed-form variance (1/K) sum_{i != j} (x_i^2 y_j^2 + x_i y_i x_j y_j)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xx, yy, xy = x**2, y**2, x * y
    cross = xx.sum() * yy.sum() - (xx * yy).sum()
    paired = xy.sum() ** 2 - (xy**2).sum()
    return float((cross + paired) / K)


def verify_lemma(
    n: int,
    K: int,
    trials: int = 100_000,
    seed: int = 0,
    x: Optional[np.ndarray] = None,
    y: Optional[np.ndarray] = None,
) -> LemmaReport:
    """
    Check that phi(x).phi(y) is unbiased for x.y with variance O(1/K).

    Every trial draws an independent hash pair (a fresh seed) and hashes the
    fixed vectors x and y.

    Args:
        n: Input dimension
        K: Hashed dimension
        trials: Number of independent hash seeds
        seed: Master seed for x, y and the trial seeds
        x, y: Optional fixed vectors (drawn from N(0, 1) otherwise)

    Returns:
        LemmaReport with bias, standard error and both variances
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) if x is None else np.asarray(x, dtype=np.float64)
    y = rng.standard_normal(n) if y is None else np.asarray(y, dtype=np.float64)

    base = derive_seed(seed, "lemma", n, K)
    buckets = np.empty((trials, n), dtype=np.int64)
    signs = np.empty((trials, n), dtype=np.float64)
    for t in range(trials):
        pair = HashPair(base + t, 1, K)
        buckets[t] = [hash_index(pair, i, 0) for i in range(n)]
        signs[t] = [hash_sign(pair, i, 0) for i in range(n)]

    offsets = (np.arange(trials)[:, None] * K + buckets).ravel()
    phi_x = np.bincount(offsets, weights=(signs * x).ravel(), minlength=trials * K)
    phi_y = np.bincount(offsets, weights=(signs * y).ravel(), minlength=trials * K)
    estimates = (phi_x.reshape(trials, K) * phi_y.reshape(trials, K)).sum(axis=1)

    exact = float(x @ y)
    variance = float(estimates.var(ddof=1))
    report = LemmaReport(
        n=n,
        K=K,
        trials=trials,
        exact_inner_product=exact,
        bias=float(estimates.mean() - exact),
        standard_error=math.sqrt(variance / trials),
        empirical_variance=variance,
        formula_variance=lemma_variance(x, y, K),
    )
    logger.info(
        f"Lemma n={n} K={K}: bias={report.bias:.3e} (se {report.standard_error:.3e}), "
        f"var={report.empirical_variance:.4f} vs {report.formula_variance:.4f}"
    )
    return report


def verify_variance_scaling(n: int, K: int, trials: int = 100_000, seed: int = 0) -> Dict[str, float]:
    """
    Ratio of hash-kernel variances at K and 2K for the same x, y.

    Returns:
        {"formula_ratio": exactly 2, "empirical_ratio": Monte-Carlo estimate}
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y = rng.standard_normal(n)
    small = verify_lemma(n, K, trials, seed, x, y)
    large = verify_lemma(n, 2 * K, trials, seed + 1, x, y)
    return {
        "formula_ratio": small.formula_variance / large.formula_variance,
        "empirical_ratio": small.empirical_variance / large.empirical_variance,
    }


def _layer_hashes(layer: VirtualLayer) -> Tuple[np.ndarray, np.ndarray]:
    if layer.cache is not None:
        return layer.cache.indices, layer.cache.signs
    return layer.family.hash_rows(range(layer.d_out), layer.d_in)


def _rows_of(a: np.ndarray) -> Tuple[np.ndarray, bool]:
    a = np.asarray(a, dtype=np.float64)
    return (a.reshape(1, -1), True) if a.ndim == 1 else (a, False)


def phi1_reformulation(layer: VirtualLayer, a: np.ndarray) -> np.ndarray:
    """
    HashedNets forward pass as z_i = w . phi_i(a) + b_i.

    [phi_i(a)]_k = sum over j with h(i,j) = k of xi(i,j) a_j (the sign is folded
    into the accumulation).
    """
    if layer.mode != "hashednets":
        raise ConfigurationError("phi1_reformulation needs a hashednets layer")
    batch, single = _rows_of(a)
    indices, signs = _layer_hashes(layer)
    bucket = indices[..., 0]
    sign = signs[..., 0].astype(np.float64)
    offsets = (np.arange(layer.d_out)[:, None] * layer.K + bucket).ravel()

    z = np.empty((batch.shape[0], layer.d_out))
    for s, sample in enumerate(batch):
        phi = np.bincount(
            offsets, weights=(sign * sample[None, :]).ravel(), minlength=layer.d_out * layer.K
        ).reshape(layer.d_out, layer.K)
        z[s] = phi @ layer.w + layer.b
    return z[0] if single else z


def enumerated_inputs(w: np.ndarray, U: int, codes: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Ordered tuples of signed compression values, all (2K)^U of them by default.

    Row c holds, for u = 0..U-1, digit d_u = (c // (2K)^u) mod 2K decoded as
    bucket d_u // 2 with sign -1 when d_u is odd.
    """
    base = 2 * w.size
    if codes is None:
        codes = np.arange(base**U)
    digits = (np.asarray(codes)[:, None] // base ** np.arange(U)[None, :]) % base
    signs = np.where(digits % 2 == 1, -1.0, 1.0)
    return signs * w[digits // 2]


def phi2_reformulation(
    layer: VirtualLayer, a: np.ndarray, cap: int = DEFAULT_ENUMERATION_CAP
) -> np.ndarray:
    """
    FunHash forward pass as z_i = g_alpha(w) . phi_i(a) + b_i over enumerated bins.

    Each hash function contributes a signed digit (bucket, sign), so bins are
    codes in mixed radix 2K. Only the codes the layer actually hits get a
    column of phi; every other bin has phi = 0.

    Raises:
        ResourceError: K^U exceeds cap
    """
    if layer.mode not in ("funhash", "multihop"):
        raise ConfigurationError("phi2_reformulation needs a funhash or multihop layer")
    space = layer.K**layer.U
    if space > cap:
        raise ResourceError(f"K^U = {space} exceeds the enumeration cap of {cap}")

    batch, single = _rows_of(a)
    indices, signs = _layer_hashes(layer)
    digits = 2 * indices.astype(np.int64) + (signs < 0)
    radix = (2 * layer.K) ** np.arange(layer.U, dtype=np.int64)
    codes = (digits * radix).sum(axis=2)
    hit, slots = np.unique(codes.ravel(), return_inverse=True)
    bins = hit.size

    w_eff = layer.multihop_resolve()
    g_values = layer.recon.batch_forward(enumerated_inputs(w_eff, layer.U, hit))
    offsets = (np.arange(layer.d_out)[:, None] * bins + slots.reshape(codes.shape)).ravel()

    z = np.empty((batch.shape[0], layer.d_out))
    for s, sample in enumerate(batch):
        phi = np.bincount(
            offsets,
            weights=np.broadcast_to(sample, (layer.d_out, layer.d_in)).ravel(),
            minlength=layer.d_out * bins,
        ).reshape(layer.d_out, bins)
        z[s] = phi @ g_values + layer.b
    return z[0] if single else z


def value_census(layer: VirtualLayer) -> int:
    """Number of distinct values in the materialized virtual matrix."""
    return int(np.unique(layer.materialize_matrix()).size)


def capacity_bound(layer: VirtualLayer) -> Optional[int]:
    """
    Upper bound on distinct virtual values: 2K for HashedNets, (2K)^U with a
    shared g. Dual space hashing has no such bound (None).
    """
    if layer.mode == "hashednets":
        return 2 * layer.K
    if layer.mode == "funhash-dual":
        return None
    return (2 * layer.K) ** layer.U
