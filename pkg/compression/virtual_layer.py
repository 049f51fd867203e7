"""
Virtual Layer
A fully-connected layer whose weight matrix V is never stored. Each entry
V_ij is rebuilt from a small compression space w through a hash family and,
outside the HashedNets mode, a jointly trained reconstruction network g.

Modes:
    hashednets    V_ij = xi(i,j) * w[h(i,j)]
    funhash       V_ij = g([xi_1 w[h_1], ..., xi_U w[h_U]]; alpha)
    funhash-dual  as funhash, with alpha_ij fetched from a second space w'
    multihop      as funhash, with w itself rebuilt from a chain of spaces
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from compression.exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    ResourceError,
)
from compression.hash_family import (
    DEFAULT_MAX_CACHE_ENTRIES,
    HashCache,
    HashFamily,
    build_cache,
    derive_seed,
)
from compression.recon_net import ReconNet
from models.base_layer import BaseLayer, LayerGrad

MODES = ("hashednets", "funhash", "funhash-dual", "multihop")
HASH_MODES = ("cached", "online")

# (hop, indices, signs, X, trace) for one hop of the multihop chain
HopTrace = Tuple[int, np.ndarray, np.ndarray, np.ndarray, List[np.ndarray]]

DEFAULT_MAX_SCRATCH_ENTRIES = 4_000_000


@dataclass
class BlockState:
    """Everything computed for one block of rows of V."""

    start: int
    stop: int
    indices: np.ndarray
    signs: np.ndarray
    X: np.ndarray
    V: np.ndarray
    trace: Optional[List[np.ndarray]] = None
    alpha_rows: Optional[np.ndarray] = None
    dual_indices: Optional[np.ndarray] = None
    dual_signs: Optional[np.ndarray] = None


@dataclass
class LayerContext:
    """Forward-pass state reused by backward()."""

    w_eff: np.ndarray
    chain: List[HopTrace]
    states: Optional[List[BlockState]] = None


@dataclass
class _BlockGrad:
    d_w: np.ndarray
    d_input: np.ndarray
    d_alpha: Optional[np.ndarray] = None
    d_w_dual: Optional[np.ndarray] = None


@dataclass
class _Hop:
    family: HashFamily
    rows: int
    cache: Optional[HashCache]
    recon: ReconNet


def default_hop_sizes(K: int, hops: int) -> List[int]:
    """Chain sizes K^(m) = ceil(K / 2^m) for m = 1..hops."""
    return [max(1, math.ceil(K / 2**m)) for m in range(1, hops + 1)]


class VirtualLayer(BaseLayer):
    """Compressed fully-connected layer backed by a hashed compression space"""

    kind = "virtual"

    def __init__(
        self,
        d_in: int,
        d_out: int,
        K: int,
        mode: str = "funhash",
        U: int = 4,
        G: int = 3,
        hops: int = 0,
        hop_sizes: Optional[Sequence[int]] = None,
        dual_k: Optional[int] = None,
        seed: int = 0,
        init_seed: Optional[int] = None,
        hash_mode: str = "cached",
        config: Optional[Dict[str, Any]] = None,
    ):
        """
        Initialize the layer.

        Args:
            d_in: Virtual input dimension
            d_out: Virtual output dimension
            K: Size of the compression space w
            mode: One of MODES
            U: Number of hash pairs (forced to 1 in hashednets mode)
            G: Depth of the reconstruction network
            hops: Number of extra hops (multihop mode)
            hop_sizes: Sizes K^(1) > ... > K^(M); defaults to halving
            dual_k: Size K' of the dual space (funhash-dual mode)
            seed: Layer seed fixing the hash layout
            init_seed: Seed for parameter initialization
            hash_mode: "cached" (precomputed) or "online"
            config: Runtime settings: max_cache_entries, max_scratch_entries,
                workers
        """
        super().__init__(d_in, d_out, config)

        if mode not in MODES:
            raise ConfigurationError(f"Unknown layer mode {mode!r}; expected one of {MODES}")
        if hash_mode not in HASH_MODES:
            raise ConfigurationError(f"Unknown hash mode {hash_mode!r}")
        if K < 1:
            raise ConfigurationError(f"Compression space size K must be >= 1, got {K}")
        if hops and mode != "multihop":
            raise ConfigurationError("hops > 0 requires the multihop mode")
        if hops < 0:
            raise ConfigurationError(f"hops must be >= 0, got {hops}")

        self.mode = mode
        self.K = K
        self.U = 1 if mode == "hashednets" else U
        self.G = G
        self.seed = seed
        self.init_seed = derive_seed(seed, "init") if init_seed is None else init_seed
        self.hash_mode = hash_mode

        self.max_cache_entries = self.config.get("max_cache_entries", DEFAULT_MAX_CACHE_ENTRIES)
        self.max_scratch_entries = self.config.get(
            "max_scratch_entries", DEFAULT_MAX_SCRATCH_ENTRIES
        )
        self.workers = max(1, int(self.config.get("workers", 1)))

        rng = np.random.default_rng(self.init_seed)
        limit = math.sqrt(6.0 / (d_in + d_out))

        # Compression space, initialized as if the matrix were dense
        self.w = rng.uniform(-limit, limit, size=K)

        self.family = HashFamily(derive_seed(seed, "weights"), self.U, K)
        self.cache = None
        if hash_mode == "cached":
            self.cache = build_cache(self.family, d_out, d_in, self.max_cache_entries)

        self.recon = None if mode == "hashednets" else ReconNet(self.U, G, rng)

        self.dual_k = None
        self.dual_family = None
        self.dual_cache = None
        self.w_dual = None
        if mode == "funhash-dual":
            self.dual_k = dual_k or max(self.recon.num_params, math.ceil(K / 8))
            scale = self.recon.init_scale()
            self.w_dual = rng.uniform(-scale, scale, size=self.dual_k)
            self.dual_family = HashFamily(
                derive_seed(seed, "dual"), self.recon.num_params, self.dual_k
            )
            if hash_mode == "cached":
                self.dual_cache = build_cache(
                    self.dual_family, d_out, d_in, self.max_cache_entries
                )

        self.hops = hops
        self.hop_sizes = []
        self._hops: List[_Hop] = []
        self.w_top = None
        if hops:
            self.hop_sizes = list(hop_sizes) if hop_sizes else default_hop_sizes(K, hops)
            self._build_hops(rng, limit)

        self.b = np.zeros(d_out)

        self.logger.debug(
            f"Built {mode} layer {d_in}->{d_out}, K={K}, U={self.U}, "
            f"ratio={self.compression_ratio:.5f}, stored={self.stored_parameter_count()}"
        )

    def _build_hops(self, rng: np.random.Generator, limit: float):
        sizes = [self.K] + self.hop_sizes
        if len(self.hop_sizes) != self.hops:
            raise ConfigurationError(
                f"Expected {self.hops} hop sizes, got {len(self.hop_sizes)}"
            )
        if any(later >= earlier for earlier, later in zip(sizes, sizes[1:])) or sizes[-1] < 1:
            raise ConfigurationError(
                f"Multi-hop chain sizes must strictly decrease from K: {sizes}"
            )

        for m in range(1, self.hops + 1):
            family = HashFamily(derive_seed(self.seed, "hop", m), self.U, sizes[m])
            cache = None
            if self.hash_mode == "cached":
                cache = build_cache(family, sizes[m - 1], 1, self.max_cache_entries)
            self._hops.append(
                _Hop(family=family, rows=sizes[m - 1], cache=cache, recon=ReconNet(self.U, self.G, rng))
            )

        self.w_top = rng.uniform(-limit, limit, size=sizes[-1])
        # w is virtual from here on
        self.w = None

    @property
    def compression_ratio(self) -> float:
        return self.K / (self.d_in * self.d_out)

    def params(self) -> Dict[str, np.ndarray]:
        params = {}
        if self.hops:
            params[f"w_hop{self.hops}"] = self.w_top
        else:
            params["w"] = self.w
        if self.mode == "funhash-dual":
            params["w_dual"] = self.w_dual
        elif self.recon is not None:
            params["alpha"] = self.recon.alpha
        for m, hop in enumerate(self._hops, start=1):
            params[f"hop{m}_alpha"] = hop.recon.alpha
        params["b"] = self.b
        return params

    def accounting(self) -> Dict[str, int]:
        """Stored scalars per parameter array, plus the total."""
        ledger = {name: int(array.size) for name, array in self.params().items()}
        ledger["total"] = sum(ledger.values())
        return ledger

    # ------------------------------------------------------------------
    # Compression space

    def multihop_resolve(self) -> np.ndarray:
        """
        Effective compression space w.

        With hops, each entry of w^(m-1) is rebuilt by g^(m) from hashed
        values of w^(m), starting from the stored w^(M).
        """
        return self._resolve_chain()[0]

    def _hop_hashes(self, hop: _Hop) -> Tuple[np.ndarray, np.ndarray]:
        if hop.cache is not None:
            indices, signs = hop.cache.indices, hop.cache.signs
        else:
            indices, signs = hop.family.hash_rows(range(hop.rows), 1)
        return indices.reshape(-1, self.U), signs.reshape(-1, self.U)

    def _resolve_chain(self) -> Tuple[np.ndarray, List[HopTrace]]:
        if not self.hops:
            return self.w, []

        current = self.w_top
        chain = []
        for m in range(self.hops, 0, -1):
            hop = self._hops[m - 1]
            indices, signs = self._hop_hashes(hop)
            X = signs * current[indices]
            trace = hop.recon.trace(X)
            chain.append((m, indices, signs, X, trace))
            current = trace[-1][:, 0]
        return current, chain

    def _chain_backward(self, chain, d_w: np.ndarray) -> Dict[str, np.ndarray]:
        grads = {}
        upstream = d_w
        for m, indices, signs, X, trace in reversed(chain):
            hop = self._hops[m - 1]
            d_X, d_alpha = hop.recon.batch_backward(X, upstream, trace=trace)
            grads[f"hop{m}_alpha"] = d_alpha
            upstream = np.bincount(
                indices.ravel(), weights=(signs * d_X).ravel(), minlength=hop.family.K
            )
        grads[f"w_hop{self.hops}"] = upstream
        return grads

    # ------------------------------------------------------------------
    # Entry-level access

    def _check_entry(self, i: int, j: int):
        if not (0 <= i < self.d_out and 0 <= j < self.d_in):
            raise DimensionMismatchError(
                f"Entry ({i}, {j}) outside the {self.d_out}x{self.d_in} virtual matrix"
            )

    def _entry_hashes(self, i: int, j: int) -> Tuple[np.ndarray, np.ndarray]:
        if self.cache is not None:
            return self.cache.indices[i, j], self.cache.signs[i, j]
        return self.family.evaluate(i, j)

    def _entry_alpha(self, i: int, j: int) -> np.ndarray:
        if self.dual_cache is not None:
            indices, signs = self.dual_cache.indices[i, j], self.dual_cache.signs[i, j]
        else:
            indices, signs = self.dual_family.evaluate(i, j)
        return signs * self.w_dual[indices]

    def gather_inputs(self, i: int, j: int) -> np.ndarray:
        """
        Ordered hashed values x_ij[u] = xi_u(i,j) * w[h_u(i,j)].
        """
        self._check_entry(i, j)
        indices, signs = self._entry_hashes(i, j)
        return signs * self.multihop_resolve()[indices]

    def materialize_entry(self, i: int, j: int) -> float:
        """Value of the virtual weight V_ij."""
        x = self.gather_inputs(i, j)
        if self.mode == "hashednets":
            return float(x[0])
        if self.mode == "funhash-dual":
            alpha = self._entry_alpha(i, j)
            return float(self.recon.batch_forward(x[None, :], alpha[None, :])[0])
        return self.recon.forward(x)

    def materialize_matrix(self) -> np.ndarray:
        """
        Dense d_out x d_in scratch copy of V. Never part of params().

        Raises:
            ResourceError: V exceeds the configured scratch budget
        """
        entries = self.d_out * self.d_in
        if entries > self.max_scratch_entries:
            raise ResourceError(
                f"Materializing {entries} entries exceeds the scratch budget "
                f"of {self.max_scratch_entries}"
            )
        w_eff = self.multihop_resolve()
        return self._compute_block(0, self.d_out, w_eff).V

    # ------------------------------------------------------------------
    # Block evaluation

    def _row_blocks(self) -> List[Tuple[int, int]]:
        rows_per_block = max(1, self.max_scratch_entries // self.d_in)
        return [
            (start, min(start + rows_per_block, self.d_out))
            for start in range(0, self.d_out, rows_per_block)
        ]

    def _map(self, fn: Callable, items: Sequence) -> List:
        if self.workers <= 1 or len(items) <= 1:
            return [fn(item) for item in items]
        # Results come back in submission order, so reductions stay fixed
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            return list(executor.map(fn, items))

    def _block_hashes(self, start: int, stop: int) -> Tuple[np.ndarray, np.ndarray]:
        if self.cache is not None:
            return self.cache.rows(start, stop)
        return self.family.hash_rows(range(start, stop), self.d_in)

    def _block_dual_hashes(self, start: int, stop: int) -> Tuple[np.ndarray, np.ndarray]:
        if self.dual_cache is not None:
            return self.dual_cache.rows(start, stop)
        return self.dual_family.hash_rows(range(start, stop), self.d_in)

    def _compute_block(self, start: int, stop: int, w_eff: np.ndarray) -> BlockState:
        indices, signs = self._block_hashes(start, stop)
        rows = stop - start
        X = (signs * w_eff[indices]).reshape(-1, self.U)

        if self.mode == "hashednets":
            return BlockState(start, stop, indices, signs, X, X[:, 0].reshape(rows, self.d_in))

        state = BlockState(start, stop, indices, signs, X, V=None)
        if self.mode == "funhash-dual":
            dual_indices, dual_signs = self._block_dual_hashes(start, stop)
            state.dual_indices = dual_indices
            state.dual_signs = dual_signs
            state.alpha_rows = (dual_signs * self.w_dual[dual_indices]).reshape(
                -1, self.recon.num_params
            )

        state.trace = self.recon.trace(X, state.alpha_rows)
        state.V = state.trace[-1][:, 0].reshape(rows, self.d_in)
        return state

    # ------------------------------------------------------------------
    # Forward / backward

    def forward(self, a: np.ndarray) -> Tuple[np.ndarray, LayerContext]:
        """
        z_i = b_i + sum_j V_ij a_j for every sample of the batch.

        V is materialized once per call when it fits the scratch budget,
        otherwise it is streamed block by block.
        """
        batch = self._as_batch(a)
        w_eff, chain = self._resolve_chain()
        blocks = self._row_blocks()
        keep = len(blocks) == 1

        def run(block):
            state = self._compute_block(block[0], block[1], w_eff)
            return (state if keep else None), batch @ state.V.T

        results = self._map(run, blocks)

        z = np.empty((batch.shape[0], self.d_out))
        for (start, stop), (_, z_block) in zip(blocks, results):
            z[:, start:stop] = z_block + self.b[start:stop]

        ctx = LayerContext(w_eff=w_eff, chain=chain)
        if keep:
            ctx.states = [results[0][0]]

        if np.asarray(a).ndim == 1:
            z = z[0]
        return z, ctx

    def _backward_block(self, state: BlockState, batch: np.ndarray, delta: np.ndarray) -> _BlockGrad:
        grad_V = delta.T @ batch
        d_input = delta @ state.V
        upstream = grad_V.ravel()

        if self.mode == "hashednets":
            weights = state.signs[..., 0].ravel() * upstream
            d_w = np.bincount(state.indices[..., 0].ravel(), weights=weights, minlength=self.K)
            return _BlockGrad(d_w=d_w, d_input=d_input)

        per_row = self.mode == "funhash-dual"
        d_X, d_alpha = self.recon.batch_backward(
            state.X, upstream, alpha=state.alpha_rows, trace=state.trace, per_row=per_row
        )
        weights = (state.signs.reshape(-1, self.U) * d_X).ravel()
        d_w = np.bincount(state.indices.ravel(), weights=weights, minlength=self.K)

        if per_row:
            dual_weights = (
                state.dual_signs.reshape(-1, self.recon.num_params) * d_alpha
            ).ravel()
            d_w_dual = np.bincount(
                state.dual_indices.ravel(), weights=dual_weights, minlength=self.dual_k
            )
            return _BlockGrad(d_w=d_w, d_input=d_input, d_w_dual=d_w_dual)

        return _BlockGrad(d_w=d_w, d_input=d_input, d_alpha=d_alpha)

    def backward(
        self, a: np.ndarray, delta: np.ndarray, ctx: Optional[LayerContext] = None
    ) -> LayerGrad:
        """
        Exact gradients of every stored parameter.

        d_w[k] accumulates a_j delta_i xi_u dg/dx_u over all (i, j, u) hashed
        to k; alpha, the dual space and hop chains follow by the chain rule.
        """
        batch = self._as_batch(a)
        delta = np.asarray(delta, dtype=np.float64).reshape(batch.shape[0], -1)
        if delta.shape[1] != self.d_out:
            raise DimensionMismatchError(
                f"delta must have width {self.d_out}, got {delta.shape[1]}"
            )

        if ctx is None:
            w_eff, chain = self._resolve_chain()
            states = None
        else:
            w_eff, chain, states = ctx.w_eff, ctx.chain, ctx.states

        blocks = self._row_blocks()

        def run(position):
            start, stop = blocks[position]
            state = states[position] if states else self._compute_block(start, stop, w_eff)
            return self._backward_block(state, batch, delta[:, start:stop])

        partials = self._map(run, list(range(len(blocks))))

        # Fixed block order keeps the sums independent of the worker count
        d_w = np.zeros(self.K)
        d_input = np.zeros_like(batch)
        d_alpha = np.zeros(self.recon.num_params) if self.recon is not None else None
        d_w_dual = np.zeros(self.dual_k) if self.dual_k else None
        for part in partials:
            d_w += part.d_w
            d_input += part.d_input
            if part.d_alpha is not None:
                d_alpha += part.d_alpha
            if part.d_w_dual is not None:
                d_w_dual += part.d_w_dual

        grads = {}
        if self.hops:
            grads.update(self._chain_backward(chain, d_w))
        else:
            grads["w"] = d_w
        if self.mode == "funhash-dual":
            grads["w_dual"] = d_w_dual
        elif self.recon is not None:
            grads["alpha"] = d_alpha
        grads["b"] = delta.sum(axis=0)

        ordered = {name: grads[name] for name in self.params()}
        if np.asarray(a).ndim == 1:
            d_input = d_input[0]
        return LayerGrad(params=ordered, d_input=d_input)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "d_in": self.d_in,
            "d_out": self.d_out,
            "K": self.K,
            "mode": self.mode,
            "U": self.U,
            "G": self.G,
            "hops": self.hops,
            "hop_sizes": list(self.hop_sizes),
            "dual_k": self.dual_k,
            "seed": self.seed,
            "init_seed": self.init_seed,
            "hash_mode": self.hash_mode,
        }

    @classmethod
    def from_dict(cls, spec: Dict[str, Any], config: Optional[Dict[str, Any]] = None):
        """Rebuild a layer (fresh parameters) from to_dict() output."""
        return cls(
            d_in=spec["d_in"],
            d_out=spec["d_out"],
            K=spec["K"],
            mode=spec["mode"],
            U=spec["U"],
            G=spec["G"],
            hops=spec.get("hops", 0),
            hop_sizes=spec.get("hop_sizes") or None,
            dual_k=spec.get("dual_k"),
            seed=spec["seed"],
            init_seed=spec.get("init_seed"),
            hash_mode=spec.get("hash_mode", "cached"),
            config=config,
        )

    def __repr__(self):
        return (
            f"<VirtualLayer {self.mode} {self.d_in}->{self.d_out} K={self.K} "
            f"U={self.U} G={self.G} stored={self.stored_parameter_count()}>"
        )
