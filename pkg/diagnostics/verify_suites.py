"""
Verification Suites
Self-checks run by `cli.py verify`. Every suite yields CheckResult rows that
are written as CSV:

    hashes     uniformity, sign balance, pair independence, cache == online
    lemma      unbiased hash kernel and its variance formula
    oracles    inner-product reformulations, degeneracy and capacity census
    gradients  finite-difference checks of every layer mode and whole nets
"""

import csv
import logging
import sys
from dataclasses import astuple, dataclass, fields
from typing import Callable, Dict, Iterable, List, Optional, TextIO

import numpy as np
from scipy import stats

from compression.hash_family import HashFamily, build_cache, derive_seed
from compression.hash_kernel import (
    DEFAULT_ENUMERATION_CAP,
    capacity_bound,
    phi1_reformulation,
    phi2_reformulation,
    value_census,
    verify_lemma,
    verify_variance_scaling,
)
from compression.recon_net import ReconNet
from compression.virtual_layer import VirtualLayer
from diagnostics.gradient_check import (
    check_layer_gradients,
    check_network_gradients,
    check_recon_gradients,
)
from models.dense_layer import DenseLayer
from models.network import Network

logger = logging.getLogger(__name__)

UNIFORMITY_BUCKETS = (2, 16, 256)
LEMMA_DIMS = (8,)
LEMMA_BUCKETS = (2, 4, 8)
GRADIENT_TOLERANCE = 1e-5
RECON_GRADIENT_TOLERANCE = 1e-6
ORACLE_TOLERANCE = 1e-12


@dataclass
class CheckResult:
    suite: str
    check: str
    value: float
    threshold: float
    passed: bool


def _below(suite: str, check: str, value: float, threshold: float) -> CheckResult:
    return CheckResult(suite, check, float(value), float(threshold), bool(value < threshold))


def max_relative_difference(a: np.ndarray, b: np.ndarray) -> float:
    """max |a - b| relative to the largest magnitude of b."""
    scale = max(float(np.max(np.abs(b))), np.finfo(np.float64).tiny)
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) / scale


# ----------------------------------------------------------------------
# hashes


def _grid(count: int):
    rows = int(np.ceil(np.sqrt(count)))
    return rows, int(np.ceil(count / rows))


def suite_hashes(entries: int = 100_000, seed: int = 0) -> List[CheckResult]:
    results = []
    d_out, d_in = _grid(entries)

    for K in UNIFORMITY_BUCKETS:
        family = HashFamily(derive_seed(seed, "uniformity", K), 2, K)
        indices, signs = family.hash_rows(range(d_out), d_in)
        counts = np.bincount(indices[..., 0].ravel(), minlength=K)
        statistic, _ = stats.chisquare(counts)
        results.append(
            _below("hashes", f"chi2_K{K}", statistic, stats.chi2.ppf(0.999, K - 1))
        )

        if K == 16:
            total = signs[..., 0].size
            mean_sign = float(np.mean(signs[..., 0]))
            results.append(_below("hashes", "sign_mean", abs(mean_sign), 3.0 / np.sqrt(total)))
            corr = np.corrcoef(indices[..., 0].ravel(), indices[..., 1].ravel())[0, 1]
            results.append(_below("hashes", "pair_correlation", abs(corr), 0.01))

    family = HashFamily(derive_seed(seed, "cache"), 4, 16)
    cache = build_cache(family, 8, 8)
    mismatches = 0
    for i in range(8):
        for j in range(8):
            indices, signs = family.evaluate(i, j)
            mismatches += int(np.any(indices != cache.indices[i, j]))
            mismatches += int(np.any(signs != cache.signs[i, j]))
    results.append(CheckResult("hashes", "cache_equals_online", mismatches, 0, mismatches == 0))
    return results


# ----------------------------------------------------------------------
# lemma


def suite_lemma(trials: int = 100_000, seed: int = 0) -> List[CheckResult]:
    results = []
    for n in LEMMA_DIMS:
        for K in LEMMA_BUCKETS:
            report = verify_lemma(n, K, trials, seed)
            results.append(
                _below("lemma", f"bias_n{n}_K{K}", abs(report.bias), 4.0 * report.standard_error)
            )
            results.append(
                _below("lemma", f"variance_n{n}_K{K}", report.variance_relative_error, 0.10)
            )

    scaling = verify_variance_scaling(8, 4, trials, seed)
    ratio = scaling["empirical_ratio"]
    results.append(
        CheckResult("lemma", "variance_ratio_K4_K8", ratio, 2.0, bool(1.8 <= ratio <= 2.2))
    )
    results.append(
        CheckResult(
            "lemma",
            "formula_ratio_K4_K8",
            scaling["formula_ratio"],
            2.0,
            bool(abs(scaling["formula_ratio"] - 2.0) < 1e-9),
        )
    )
    return results


# ----------------------------------------------------------------------
# oracles

PHI2_GRID = [
    # (d_out, d_in, K, U, G, hops)
    (4, 4, 2, 2, 3, 0),
    (4, 4, 3, 2, 2, 0),
    (5, 3, 4, 2, 4, 0),
    (4, 4, 2, 3, 3, 0),
    (4, 4, 4, 1, 3, 0),
    (4, 4, 4, 2, 3, 1),
    (4, 4, 8, 4, 3, 0),
]


def suite_oracles(seed: int = 0, enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> List[CheckResult]:
    results = []
    rng = np.random.default_rng(seed)

    layer = VirtualLayer(4, 4, K=3, mode="hashednets", seed=derive_seed(seed, "phi1"))
    layer.b[:] = rng.standard_normal(4)
    a = rng.standard_normal((6, 4))
    diff = max_relative_difference(phi1_reformulation(layer, a), layer.forward(a)[0])
    results.append(_below("oracles", "phi1_hashednets", diff, ORACLE_TOLERANCE))

    for d_out, d_in, K, U, G, hops in PHI2_GRID:
        mode = "multihop" if hops else "funhash"
        layer = VirtualLayer(
            d_in, d_out, K=K, mode=mode, U=U, G=G, hops=hops, seed=derive_seed(seed, "phi2", K, U)
        )
        layer.b[:] = rng.standard_normal(d_out)
        a = rng.standard_normal((6, d_in))
        diff = max_relative_difference(phi2_reformulation(layer, a, enumeration_cap), layer.forward(a)[0])
        results.append(_below("oracles", f"phi2_{mode}_K{K}_U{U}_G{G}", diff, ORACLE_TOLERANCE))

    hashed = VirtualLayer(8, 8, K=4, mode="hashednets", seed=derive_seed(seed, "degeneracy"))
    selector = VirtualLayer(8, 8, K=4, mode="funhash", U=2, G=2, seed=derive_seed(seed, "degeneracy"))
    selector.recon.set_selector(0)
    a = rng.standard_normal((3, 8))
    z_hashed, _ = hashed.forward(a)
    z_selector, _ = selector.forward(a)
    mismatches = int(np.count_nonzero(z_hashed != z_selector))
    results.append(CheckResult("oracles", "degeneracy_forward", mismatches, 0, mismatches == 0))

    census_seed = derive_seed(seed, "census")
    for mode, U in (("hashednets", 1), ("funhash", 2)):
        layer = VirtualLayer(32, 32, K=2, mode=mode, U=U, G=3, seed=census_seed)
        distinct = value_census(layer)
        bound = capacity_bound(layer)
        results.append(
            CheckResult("oracles", f"census_{mode}", distinct, bound, distinct <= bound)
        )
        if mode == "funhash":
            results.append(
                CheckResult(
                    "oracles", "census_exceeds_2K", distinct, 2 * layer.K, distinct > 2 * layer.K
                )
            )
    return results


# ----------------------------------------------------------------------
# gradients

LAYER_GRID = [
    # (mode, U, G, hops)
    ("hashednets", 1, 3, 0),
    ("funhash", 2, 2, 0),
    ("funhash", 2, 3, 0),
    ("funhash", 4, 2, 0),
    ("funhash", 4, 3, 0),
    ("funhash-dual", 2, 3, 0),
    ("multihop", 2, 3, 1),
]


def suite_gradients(seed: int = 0) -> List[CheckResult]:
    results = []
    rng = np.random.default_rng(seed)

    for U in (2, 4, 8):
        for G in (2, 3, 4):
            recon = ReconNet(U, G, np.random.default_rng(derive_seed(seed, "recon", U, G)))
            worst = 0.0
            for _ in range(10):
                errors = check_recon_gradients(recon, rng.standard_normal(U), rng.standard_normal())
                worst = max(worst, *errors.values())
            results.append(_below("gradients", f"recon_U{U}_G{G}", worst, RECON_GRADIENT_TOLERANCE))

    for mode, U, G, hops in LAYER_GRID:
        layer = VirtualLayer(
            6, 5, K=8, mode=mode, U=U, G=G, hops=hops, seed=derive_seed(seed, "layer", mode, U, G)
        )
        layer.b[:] = rng.standard_normal(5)
        errors = check_layer_gradients(layer, rng.standard_normal((3, 6)), rng)
        label = mode if mode == "hashednets" else f"{mode}_U{U}_G{G}"
        results.append(_below("gradients", f"layer_{label}", max(errors.values()), GRADIENT_TOLERANCE))

    dense = DenseLayer(6, 5, seed=seed)
    errors = check_layer_gradients(dense, rng.standard_normal((3, 6)), rng)
    results.append(_below("gradients", "layer_dense", max(errors.values()), GRADIENT_TOLERANCE))

    for mode in ("hashednets", "funhash", "funhash-dual", "multihop"):
        hops = int(mode == "multihop")
        network = Network(
            [
                VirtualLayer(d_in, d_out, K=K, mode=mode, U=2, G=3, hops=hops, seed=derive_seed(seed, "net", mode, k))
                for k, (d_in, d_out, K) in enumerate([(6, 5, 8), (5, 3, 6)])
            ]
        )
        X = rng.uniform(0.0, 1.0, size=(4, 6))
        targets = rng.integers(0, 3, size=4)
        errors = check_network_gradients(network, X, targets)
        results.append(_below("gradients", f"network_{mode}", max(errors.values()), GRADIENT_TOLERANCE))
    return results


SUITES: Dict[str, Callable[..., List[CheckResult]]] = {
    "hashes": suite_hashes,
    "lemma": suite_lemma,
    "oracles": suite_oracles,
    "gradients": suite_gradients,
}


def run_suites(
    names: Iterable[str],
    seed: int = 0,
    trials: Optional[int] = None,
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
) -> List[CheckResult]:
    """
    Run the named suites in order.

    Args:
        names: Suite names (keys of SUITES)
        seed: Master seed of every suite
        trials: Monte-Carlo trials of the lemma suite
        enumeration_cap: Largest K^U the oracle suite accepts

    Returns:
        All CheckResult rows
    """
    results = []
    for name in names:
        if name not in SUITES:
            raise ValueError(f"Unknown verification suite {name!r}; expected one of {list(SUITES)}")
        kwargs = {"seed": seed}
        if name == "lemma" and trials:
            kwargs["trials"] = trials
        if name == "oracles":
            kwargs["enumeration_cap"] = enumeration_cap
        suite_results = SUITES[name](**kwargs)
        failed = [r.check for r in suite_results if not r.passed]
        if failed:
            logger.warning(f"✗ {name}: {len(failed)} failed checks ({', '.join(failed)})")
        else:
            logger.info(f"✓ {name}: {len(suite_results)} checks passed")
        results.extend(suite_results)
    return results


def write_report(results: List[CheckResult], stream: TextIO = None):
    """Write results as CSV (header first) to a stream, stdout by default."""
    writer = csv.writer(stream or sys.stdout, lineterminator="\n")
    writer.writerow([f.name for f in fields(CheckResult)])
    for result in results:
        suite, check, value, threshold, passed = astuple(result)
        writer.writerow([suite, check, repr(value), repr(threshold), "pass" if passed else "fail"])
