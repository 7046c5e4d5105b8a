"""Random ReLU generative networks without biases.

A network of depth ``d`` maps a latent vector ``x`` of length ``k = n_0`` to
``G(x) = relu(W_d ... relu(W_2 relu(W_1 x)))`` of length ``n = n_d``, where
``W_i`` has shape ``(n_i, n_{i-1})``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "GenerativeNetwork",
    "HiddenTrace",
    "forward",
    "active_submatrix",
    "sample_gaussian_network",
    "hidden_trace",
    "construct_collision",
    "save_matrix",
    "load_matrix",
    "save_network",
    "load_network",
]


@dataclass(frozen=True, eq=False)
class GenerativeNetwork:
    """Depth-d chain of weight matrices; ``weights[i]`` has shape (n_{i+1}, n_i)."""

    weights: tuple[np.ndarray, ...]
    dims: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if len(self.weights) < 1:
            raise ValueError("a network needs at least one layer")
        mats = []
        for i, w in enumerate(self.weights):
            w = np.array(w, dtype=float)
            if w.ndim != 2:
                raise ValueError(f"layer {i} weight is not a matrix")
            if not np.all(np.isfinite(w)):
                raise ValueError(f"layer {i} weight has non-finite entries")
            if mats and w.shape[1] != mats[-1].shape[0]:
                raise ValueError(
                    f"layer {i} expects input of size {w.shape[1]}, "
                    f"previous layer outputs {mats[-1].shape[0]}"
                )
            w.setflags(write=False)
            mats.append(w)
        object.__setattr__(self, "weights", tuple(mats))
        dims = (mats[0].shape[1],) + tuple(w.shape[0] for w in mats)
        object.__setattr__(self, "dims", dims)

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def latent_dim(self) -> int:
        return self.dims[0]

    @property
    def output_dim(self) -> int:
        return self.dims[-1]

    def __call__(self, x):
        return forward(self, x)


@dataclass(frozen=True, eq=False)
class HiddenTrace:
    """Layer inputs ``states[i]`` (``states[0]`` is x) and the product of active submatrices."""

    states: tuple[np.ndarray, ...]
    active_products: np.ndarray


def _latent(net: GenerativeNetwork, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (net.latent_dim,):
        raise ValueError(f"latent vector must have shape ({net.latent_dim},), got {x.shape}")
    return x


def forward(net: GenerativeNetwork, x) -> np.ndarray:
    """Evaluate G(x)."""
    h = _latent(net, x)
    for w in net.weights:
        h = np.maximum(w @ h, 0.0)
    return h


def active_submatrix(W, x) -> np.ndarray:
    """Return ``W_{+,x}``: rows of W with ``W_i x > 0`` kept, all others zeroed.

    Ties (``W_i x == 0``) are inactive.
    """
    W = np.asarray(W, dtype=float)
    x = np.asarray(x, dtype=float)
    if W.ndim != 2 or x.shape != (W.shape[1],):
        raise ValueError(f"shape mismatch: W {W.shape}, x {x.shape}")
    return np.where((W @ x > 0)[:, None], W, 0.0)


def sample_gaussian_network(
    dims: Sequence[int], variance_rule: str = "one_over_rows", seed: int = 0
) -> GenerativeNetwork:
    """Draw a network with i.i.d. Gaussian weights.

    Parameters
    ----------
    dims : sequence of int
        Layer widths ``(k, n_1, ..., n_d)``.
    variance_rule : {"unit", "one_over_rows"}
        ``"unit"`` draws N(0, 1) entries; ``"one_over_rows"`` draws N(0, 1/n_i)
        for the matrix with ``n_i`` rows.
    seed : int
        Seed for :func:`numpy.random.default_rng`.
    """
    dims = [int(n) for n in dims]
    if len(dims) < 2:
        raise ValueError("dims needs at least an input and an output width")
    if any(n <= 0 for n in dims):
        raise ValueError("layer widths must be positive")
    if variance_rule not in ("unit", "one_over_rows"):
        raise ValueError(f"unknown variance rule {variance_rule!r}")
    rng = np.random.default_rng(seed)
    weights = []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        scale = 1.0 if variance_rule == "unit" else 1.0 / np.sqrt(n_out)
        weights.append(scale * rng.standard_normal((n_out, n_in)))
    return GenerativeNetwork(tuple(weights))


def hidden_trace(net: GenerativeNetwork, x) -> HiddenTrace:
    """Record each layer's input and the accumulated product ``W_{+,x_d} ... W_{+,x_1}``."""
    h = _latent(net, x)
    states = []
    product = np.eye(net.latent_dim)
    for w in net.weights:
        states.append(h)
        active = active_submatrix(w, h)
        product = active @ product
        h = np.maximum(w @ h, 0.0)
    return HiddenTrace(tuple(states), product)


def construct_collision(W) -> tuple[np.ndarray, np.ndarray]:
    """Build two latent vectors with ``relu(W x) == relu(W y)`` that are far apart.

    Requires ``m <= 2k - 1`` rows. For full column rank W with row norms at
    most ``B`` the pair satisfies ``||x - y|| >= 1/B``. For rank-deficient W the
    pair is ``x = 0`` and ``y`` a unit null vector of W.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2:
        raise ValueError("W must be a matrix")
    m, k = W.shape
    if m >= 2 * k:
        raise ValueError(f"collision construction needs m <= 2k - 1, got m={m}, k={k}")

    if np.linalg.matrix_rank(W) < k:
        return np.zeros(k), _null_vector(W)

    # Pivoted QR on W^T picks k linearly independent rows of W.
    _, _, piv = scipy.linalg.qr(W.T, pivoting=True, mode="economic")
    S, T = np.sort(piv[:k]), np.sort(piv[k:])
    W_S = W[S]
    x = np.linalg.solve(W_S, -np.ones(k))
    if T.size:
        v = _null_vector(W[T])
    else:
        v = np.zeros(k)
        v[0] = 1.0
    lam = np.max(np.abs(W_S @ v))
    if lam < 1e-12:
        return np.zeros(k), _null_vector(W)
    return x, x + v / lam


def _null_vector(A: np.ndarray) -> np.ndarray:
    """Unit vector in the null space of A (assumed nontrivial), sign-normalized."""
    k = A.shape[1]
    _, _, vt = np.linalg.svd(A, full_matrices=True)
    v = vt[-1] if A.shape[0] >= 1 else np.eye(k)[0]
    v = v / np.linalg.norm(v)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v


# -- persistence ---------------------------------------------------------------


def _format_matrix(W: np.ndarray, seed: int) -> str:
    lines = [f"{W.shape[0]} {W.shape[1]} {int(seed)}"]
    for row in W:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def _parse_matrices(text: str) -> list[tuple[np.ndarray, int]]:
    tokens = text.split()
    out = []
    pos = 0
    while pos < len(tokens):
        rows, cols, seed = (int(t) for t in tokens[pos : pos + 3])
        pos += 3
        count = rows * cols
        if pos + count > len(tokens):
            raise ValueError("truncated matrix block")
        vals = np.array([float(t) for t in tokens[pos : pos + count]])
        pos += count
        out.append((vals.reshape(rows, cols), seed))
    return out


def save_matrix(path, W, seed: int = 0) -> None:
    """Write ``rows cols seed`` then row-major entries in shortest round-trip form."""
    Path(path).write_text(_format_matrix(np.asarray(W, dtype=float), seed))


def load_matrix(path) -> tuple[np.ndarray, int]:
    blocks = _parse_matrices(Path(path).read_text())
    if len(blocks) != 1:
        raise ValueError(f"expected one matrix block, found {len(blocks)}")
    return blocks[0]


def save_network(path, net: GenerativeNetwork, seed: int = 0) -> None:
    """Write every layer as consecutive matrix blocks, first layer first."""
    Path(path).write_text("".join(_format_matrix(w, seed) for w in net.weights))


def load_network(path) -> GenerativeNetwork:
    return GenerativeNetwork(tuple(w for w, _ in _parse_matrices(Path(path).read_text())))
