"""
Reconstruction Network
The small network g(x; alpha) that maps the U ordered hashed values of a
virtual entry to the entry itself. Hidden layers use tanh, the output layer
is linear.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from compression.exceptions import ConfigurationError, DimensionMismatchError

logger = logging.getLogger(__name__)

RECON_DEPTHS = (2, 3, 4)


def recon_widths(U: int, G: int) -> Tuple[int, ...]:
    """
    Layer widths of g for U inputs and depth G.

    G2 is U x 1, G3 is U x ceil(U/2) x 1 and G4 is U x U x ceil(U/2) x 1.
    """
    if U < 1:
        raise ConfigurationError(f"Reconstruction network needs U >= 1, got {U}")
    half = max(1, math.ceil(U / 2))
    if G == 2:
        return (U, 1)
    if G == 3:
        return (U, half, 1)
    if G == 4:
        return (U, U, half, 1)
    raise ConfigurationError(f"Reconstruction depth G must be one of {RECON_DEPTHS}, got {G}")


@dataclass
class ReconGrad:
    """Derivatives of upstream * g with respect to the inputs and to alpha."""

    d_input: np.ndarray
    d_alpha: np.ndarray


class ReconNet:
    """
    Multivariate reconstruction function g(.; alpha).

    All parameters live in one flat vector ``alpha`` laid out layer by layer
    as (weight matrix row-major, bias). The same layout is used when alpha is
    supplied per entry (dual space hashing), with one alpha row per input row.
    """

    def __init__(self, U: int, G: int = 3, rng: Optional[np.random.Generator] = None):
        """
        Initialize the network.

        Args:
            U: Number of ordered inputs
            G: Depth (number of layers counting the input layer), 2 to 4
            rng: Generator used for the hidden-layer initialization
        """
        self.U = U
        self.G = G
        self.widths = recon_widths(U, G)
        self.shapes = [(fo, fi) for fi, fo in zip(self.widths[:-1], self.widths[1:])]

        self._slices = []
        offset = 0
        for fo, fi in self.shapes:
            w_slice = slice(offset, offset + fo * fi)
            offset += fo * fi
            b_slice = slice(offset, offset + fo)
            offset += fo
            self._slices.append((w_slice, b_slice))
        self.num_params = offset

        self.alpha = self.initial_alpha(rng or np.random.default_rng(0))

    def initial_alpha(self, rng: np.random.Generator) -> np.ndarray:
        """
        Fresh parameter vector.

        Hidden layers are uniform in +-sqrt(6 / (fan_in + fan_out)); the output
        layer starts as the mean of its inputs; every bias starts at zero.
        """
        alpha = np.zeros(self.num_params)
        last = len(self.shapes) - 1
        for layer, ((fo, fi), (w_slice, _)) in enumerate(zip(self.shapes, self._slices)):
            if layer == last:
                alpha[w_slice] = 1.0 / fi
            else:
                limit = math.sqrt(6.0 / (fi + fo))
                alpha[w_slice] = rng.uniform(-limit, limit, size=fo * fi)
        return alpha

    def init_scale(self) -> float:
        """Typical magnitude of an initial parameter, used to seed dual spaces."""
        if len(self.shapes) == 1:
            return 1.0 / self.U
        fo, fi = self.shapes[0]
        return math.sqrt(6.0 / (fi + fo))

    def set_selector(self, position: int = 0):
        """
        Make g return its input at ``position`` unchanged (the HashedNets case).

        Only meaningful for the linear G2 network.
        """
        if self.G != 2:
            raise ConfigurationError("The selector configuration needs a linear G2 network")
        self.alpha[:] = 0.0
        self.alpha[position] = 1.0

    def unpack(self, alpha: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray]]:
        """
        View a flat alpha (shape (P,) or (R, P)) as per-layer (W, b).
        """
        lead = alpha.shape[:-1]
        return [
            (alpha[..., w_slice].reshape(lead + shape), alpha[..., b_slice])
            for shape, (w_slice, b_slice) in zip(self.shapes, self._slices)
        ]

    def _check_inputs(self, X: np.ndarray, alpha: Optional[np.ndarray]) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.U:
            raise DimensionMismatchError(
                f"Reconstruction inputs must have shape (R, {self.U}), got {X.shape}"
            )
        if alpha is not None and alpha.shape[-1] != self.num_params:
            raise DimensionMismatchError(
                f"alpha must have {self.num_params} entries, got {alpha.shape[-1]}"
            )
        if alpha is not None and alpha.ndim == 2 and alpha.shape[0] != X.shape[0]:
            raise DimensionMismatchError("Per-row alpha needs one row per input row")
        return X

    def trace(self, X: np.ndarray, alpha: Optional[np.ndarray] = None) -> List[np.ndarray]:
        """
        Forward pass keeping every layer's activations.

        Args:
            X: Inputs of shape (R, U)
            alpha: Shared (P,) or per-row (R, P) parameters; defaults to self.alpha

        Returns:
            Activations [X, h_1, ..., output] with the output of shape (R, 1)
        """
        X = self._check_inputs(X, alpha)
        params = self.unpack(self.alpha if alpha is None else alpha)
        activations = [X]
        h = X
        last = len(params) - 1
        for layer, (W, b) in enumerate(params):
            # Accumulate column by column so each row's result does not depend
            # on how many rows are evaluated together
            out = np.array(np.broadcast_to(b, (h.shape[0], W.shape[-2])))
            for k in range(h.shape[1]):
                out += h[:, k : k + 1] * W[..., k]
            h = out if layer == last else np.tanh(out)
            activations.append(h)
        return activations

    def batch_forward(self, X: np.ndarray, alpha: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Evaluate g on every row of X.

        Returns:
            Vector of R outputs, bit-identical to per-row forward()
        """
        return self.trace(X, alpha)[-1][:, 0]

    def forward(self, x: np.ndarray) -> float:
        """Evaluate g on a single ordered input vector of length U."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.U,):
            raise DimensionMismatchError(f"Expected {self.U} inputs, got shape {x.shape}")
        return float(self.batch_forward(x[None, :])[0])

    def batch_backward(
        self,
        X: np.ndarray,
        upstream: np.ndarray,
        alpha: Optional[np.ndarray] = None,
        trace: Optional[List[np.ndarray]] = None,
        per_row: bool = False,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Back-propagate upstream derivatives through g.

        Args:
            X: Inputs of shape (R, U)
            upstream: dL/dg for every row, shape (R,)
            alpha: Shared or per-row parameters; defaults to self.alpha
            trace: Activations from trace(X, alpha), recomputed when missing
            per_row: Return alpha gradients per row (R, P) instead of summed (P,)

        Returns:
            (d_input of shape (R, U), d_alpha)
        """
        if trace is None:
            trace = self.trace(X, alpha)
        params = self.unpack(self.alpha if alpha is None else alpha)
        upstream = np.asarray(upstream, dtype=np.float64)
        rows = trace[0].shape[0]

        if per_row:
            d_alpha = np.zeros((rows, self.num_params))
        else:
            d_alpha = np.zeros(self.num_params)

        grad = upstream.reshape(rows, 1)
        for layer in range(len(params) - 1, -1, -1):
            W, _ = params[layer]
            h_in = trace[layer]
            w_slice, b_slice = self._slices[layer]

            if per_row:
                d_alpha[:, w_slice] = (grad[:, :, None] * h_in[:, None, :]).reshape(rows, -1)
                d_alpha[:, b_slice] = grad
            else:
                d_alpha[w_slice] = (grad.T @ h_in).ravel()
                d_alpha[b_slice] = grad.sum(axis=0)

            if W.ndim == 3:
                grad = np.einsum("ro,roi->ri", grad, W)
            else:
                grad = grad @ W

            # trace[layer] is a tanh output for every layer but the input
            if layer > 0:
                grad = grad * (1.0 - h_in**2)

        return grad, d_alpha

    def backward(self, x: np.ndarray, upstream: float) -> ReconGrad:
        """
        Derivatives of upstream * g(x) for a single input vector.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.U,):
            raise DimensionMismatchError(f"Expected {self.U} inputs, got shape {x.shape}")
        d_input, d_alpha = self.batch_backward(x[None, :], np.array([upstream]))
        return ReconGrad(d_input=d_input[0], d_alpha=d_alpha)

    def __repr__(self):
        widths = "x".join(str(w) for w in self.widths)
        return f"<ReconNet U{self.U}-G{self.G} {widths} |alpha|={self.num_params}>"
