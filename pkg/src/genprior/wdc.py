"""Weight Distribution Condition: expectation matrices, deviation estimates, smoothing.

For a matrix W with i.i.d. N(0, 1) entries the expected activated Gram matrix is

    Q_{x,y} = (1/n) E[W_{+,x}^T W_{+,y}]
            = (pi - theta)/(2 pi) I + sin(theta)/(2 pi) M_{x,y},

with ``theta`` the angle between x and y and ``M_{x,y}`` the operator that swaps
the unit directions of x and y and annihilates their orthogonal complement.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .network import active_submatrix

__all__ = [
    "QMatrix",
    "WdcReport",
    "angle",
    "swap_matrix",
    "q_matrix",
    "q_quadratic_form",
    "sample_pairs",
    "wdc_deviation",
    "smoothed_step",
    "smoothed_gram",
    "in_theta",
    "operator_norm",
]

_PARALLEL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class QMatrix:
    matrix: np.ndarray
    angle: float


@dataclass(frozen=True, eq=False)
class WdcReport:
    max_deviation: float
    argmax_x: np.ndarray
    argmax_y: np.ndarray
    pairs_tested: int
    normalized: bool

    def to_record(self) -> dict:
        return {
            "max_deviation": float(self.max_deviation),
            "pairs_tested": int(self.pairs_tested),
            "normalized": bool(self.normalized),
            "argmax_x": [float(v) for v in self.argmax_x],
            "argmax_y": [float(v) for v in self.argmax_y],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record())


def _unit(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError(f"{name} must be nonzero")
    return v / norm


def _frame(x, y):
    """Return (x_hat, u, cos, sin) with y_hat = cos * x_hat + sin * u, u orthogonal to x_hat.

    ``u`` is None when x and y are parallel.
    """
    xh = _unit(x, "x")
    yh = _unit(y, "y")
    if xh.shape != yh.shape:
        raise ValueError("x and y must have the same length")
    c = float(xh @ yh)
    r = yh - c * xh
    s = float(np.linalg.norm(r))
    if s < _PARALLEL_TOL:
        return xh, None, np.sign(c) or 1.0, 0.0
    return xh, r / s, c, s


def angle(x, y) -> float:
    """Angle in [0, pi] between nonzero x and y (atan2 form, accurate near 0 and pi)."""
    _, _, c, s = _frame(x, y)
    return float(np.arctan2(s, c))


def swap_matrix(x, y) -> np.ndarray:
    """Symmetric ``M`` with ``M x_hat = y_hat``, ``M y_hat = x_hat`` and ``M z = 0`` off span{x, y}."""
    xh, u, c, s = _frame(x, y)
    if u is None:
        return c * np.outer(xh, xh)
    # Reflection across the bisector of x_hat and y_hat, restricted to the plane.
    return c * (np.outer(xh, xh) - np.outer(u, u)) + s * (np.outer(xh, u) + np.outer(u, xh))


def q_matrix(x, y) -> QMatrix:
    xh, u, c, s = _frame(x, y)
    theta = float(np.arctan2(s, c))
    k = xh.shape[0]
    Q = (np.pi - theta) / (2 * np.pi) * np.eye(k)
    if u is not None:
        Q = Q + s / (2 * np.pi) * swap_matrix(x, y)
    return QMatrix(Q, theta)


def q_quadratic_form(X, Y, U) -> np.ndarray:
    """Batched ``u^T Q_{x,y} u`` for rows of X, Y, U (each of shape (p, k))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    xh = X / np.linalg.norm(X, axis=1, keepdims=True)
    yh = Y / np.linalg.norm(Y, axis=1, keepdims=True)
    c = np.einsum("ij,ij->i", xh, yh)
    r = yh - c[:, None] * xh
    s = np.linalg.norm(r, axis=1)
    theta = np.arctan2(s, c)
    par = s < _PARALLEL_TOL
    u_perp = np.where(par[:, None], 0.0, r / np.where(par, 1.0, s)[:, None])
    a = np.einsum("ij,ij->i", U, xh)
    b = np.einsum("ij,ij->i", U, u_perp)
    uMu = c * (a * a - b * b) + 2 * s * a * b
    uu = np.einsum("ij,ij->i", U, U)
    return (np.pi - theta) / (2 * np.pi) * uu + np.where(par, 0.0, s / (2 * np.pi) * uMu)


def sample_pairs(k: int, count: int, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """Uniform unit-vector pairs plus equal, antipodal and orthogonal extremes.

    The structured pairs come first; ``count`` is the number of random pairs added.
    """
    pairs = []
    z = rng.standard_normal(k)
    z /= np.linalg.norm(z)
    pairs.append((z, z.copy()))
    pairs.append((z, -z))
    if k >= 2:
        w = rng.standard_normal(k)
        w -= (w @ z) * z
        w /= np.linalg.norm(w)
        pairs.append((z, w))
    P = rng.standard_normal((2 * count, k))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    pairs.extend((P[2 * i], P[2 * i + 1]) for i in range(count))
    return pairs


def _pair_deviation(W: np.ndarray, x, y, normalized: bool) -> float:
    n = W.shape[0]
    G = active_submatrix(W, x).T @ active_submatrix(W, y)
    if normalized:
        G = G / n
    D = G - q_matrix(x, y).matrix
    return float(np.max(np.abs(np.linalg.eigvalsh((D + D.T) / 2))))


def wdc_deviation(W, pairs, normalized: bool = True) -> WdcReport:
    """Largest ``||(1/n) W_{+,x}^T W_{+,y} - Q_{x,y}||`` over the given pairs.

    With ``normalized=False`` the 1/n factor is dropped, which is the right
    comparison for W with N(0, 1/n) entries.
    """
    W = np.asarray(W, dtype=float)
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no pairs to test")
    best, best_pair = -1.0, None
    for x, y in pairs:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != (W.shape[1],) or y.shape != (W.shape[1],):
            raise ValueError("pair vectors must match the column count of W")
        dev = _pair_deviation(W, x, y, normalized)
        if dev > best:
            best, best_pair = dev, (x, y)
    return WdcReport(best, best_pair[0], best_pair[1], len(pairs), normalized)


def smoothed_step(z, epsilon: float, side: str):
    """Piecewise-linear approximation of the step ``1{z > 0}``.

    ``side="upper"`` is 1 for z >= 0 and ramps from 0 at ``-epsilon``;
    ``side="lower"`` is 0 for z <= 0 and ramps to 1 at ``epsilon``.
    Both are ``1/epsilon``-Lipschitz.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    z = np.asarray(z, dtype=float)
    if side == "upper":
        out = np.clip(1.0 + z / epsilon, 0.0, 1.0)
    elif side == "lower":
        out = np.clip(z / epsilon, 0.0, 1.0)
    else:
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
    return out if out.ndim else float(out)


def smoothed_gram(W, x, y, epsilon: float, side: str) -> np.ndarray:
    """``sum_i h(w_i x) h(w_i y) w_i w_i^T`` with h the chosen smoothed step."""
    W = np.asarray(W, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (W.shape[1],) or y.shape != (W.shape[1],):
        raise ValueError("x and y must match the column count of W")
    weight = smoothed_step(W @ x, epsilon, side) * smoothed_step(W @ y, epsilon, side)
    return (W * weight[:, None]).T @ W


def in_theta(W) -> bool:
    """True iff ``||W|| <= 3 sqrt(n)`` and every row norm is at most ``sqrt(2k)``."""
    W = np.asarray(W, dtype=float)
    n, k = W.shape
    if np.max(np.linalg.norm(W, axis=1)) > np.sqrt(2 * k):
        return False
    return operator_norm(W) <= 3 * np.sqrt(n)


def operator_norm(M, max_iter: int = 10_000, tol: float = 1e-10, seed: int = 0) -> float:
    """Largest singular value by power iteration on ``M^T M``."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[None, :]
    if M.size == 0:
        return 0.0
    gram = M.T @ M if M.shape[0] >= M.shape[1] else M @ M.T
    if not np.any(gram):
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    rq = float(v @ gram @ v)
    for _ in range(max_iter):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            # Start landed in the null space; restart from a fresh direction.
            v = rng.standard_normal(gram.shape[0])
            v /= np.linalg.norm(v)
            continue
        v = w / norm
        rq_new = float(v @ gram @ v)
        if abs(rq_new - rq) <= tol * abs(rq_new):
            rq = rq_new
            break
        rq = rq_new
    return float(np.sqrt(max(rq, 0.0)))
