"""Pseudo-balls, wideness estimates, aspherical nets and concentration experiments.

A pseudo-ball is a symmetric convex set describing the perturbations under which
a function moves by at most a prescribed amount. Two families are provided:

* :class:`Slab` -- ``{v : |w . v| <= epsilon}``, the set of small deviations of
  the linear function ``x -> w . x``;
* :class:`WeightedSlab` -- ``{v : sum_i |M_i v| (M_i u)^2 <= t n}``, which
  controls the smoothed quadratic form ``(1/n) u^T G_{M,-eps}(x, y) u``.

An :class:`AsphericalNet` covers the unit sphere with translates of
``1/2 (B  cap  delta Ball)`` and perturbs each center uniformly inside its
translate.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.stats

from .wdc import in_theta, q_quadratic_form, smoothed_step

__all__ = [
    "Slab",
    "WeightedSlab",
    "PseudoBallSpec",
    "WidenessCertificate",
    "AsphericalNet",
    "NetConstructionError",
    "SamplerError",
    "ConcentrationResult",
    "pseudo_ball_contains",
    "gauge",
    "uniform_ball",
    "uniform_sphere",
    "net_overlaps",
    "concentration_deviation",
    "analytic_wideness_bound",
    "sphere_sequence",
    "volume_fraction",
    "build_aspherical_net",
    "net_covers",
    "smoothed_form",
    "pseudo_lipschitz_check",
    "sample_theta_matrix",
    "uniform_concentration_experiment",
]


class NetConstructionError(RuntimeError):
    pass


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Slab:
    w: np.ndarray
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "w", np.atleast_1d(np.asarray(self.w, dtype=float)))
        if not self.epsilon > 0:
            raise ValueError("slab half-width must be positive")

    @property
    def dim(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True, eq=False)
class WeightedSlab:
    M: np.ndarray
    t: float
    u: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        u = np.atleast_1d(np.asarray(self.u, dtype=float))
        if u.shape != (M.shape[1],):
            raise ValueError("u must match the column count of M")
        if not self.t > 0:
            raise ValueError("t must be positive")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "u", u)
        # Row weights (M_i u)^2 are fixed per ball; cache them.
        object.__setattr__(self, "_row_weights", (M @ u) ** 2)

    @property
    def dim(self) -> int:
        return self.M.shape[1]


PseudoBallSpec = Union[Slab, WeightedSlab]


def gauge(spec: PseudoBallSpec, V) -> np.ndarray:
    """Positively homogeneous gauge: ``v`` is a member iff ``gauge(v) <= 1``.

    Accepts a single vector or a stack of row vectors.
    """
    V = np.asarray(V, dtype=float)
    if V.shape[-1] != spec.dim:
        raise ValueError(f"vector dimension {V.shape[-1]} does not match pseudo-ball dimension {spec.dim}")
    if isinstance(spec, Slab):
        return np.abs(V @ spec.w) / spec.epsilon
    n = spec.M.shape[0]
    return (np.abs(V @ spec.M.T) @ spec._row_weights) / (spec.t * n)


def pseudo_ball_contains(spec: PseudoBallSpec, v) -> bool:
    """Exact, non-strict membership test."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a single vector")
    if isinstance(spec, Slab):
        return bool(abs(v @ spec.w) <= spec.epsilon)
    n = spec.M.shape[0]
    return bool(np.abs(spec.M @ v) @ spec._row_weights <= spec.t * n)


def _members(spec: PseudoBallSpec, V: np.ndarray) -> np.ndarray:
    # Same inequalities as pseudo_ball_contains, vectorized over rows.
    if isinstance(spec, Slab):
        return np.abs(V @ spec.w) <= spec.epsilon
    n = spec.M.shape[0]
    return np.abs(V @ spec.M.T) @ spec._row_weights <= spec.t * n


def _in_half_core(spec: PseudoBallSpec, V: np.ndarray, delta: float) -> np.ndarray:
    """Membership of rows of V in ``1/2 (B cap delta Ball)``."""
    V = np.atleast_2d(V)
    return (np.linalg.norm(V, axis=1) <= delta / 2) & _members(spec, 2.0 * V)


# -- sampling helpers ----------------------------------------------------------


def uniform_ball(rng: np.random.Generator, count: int, k: int, radius: float = 1.0) -> np.ndarray:
    g = rng.standard_normal((count, k))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / k)
    return g * r[:, None]


def uniform_sphere(rng: np.random.Generator, count: int, k: int) -> np.ndarray:
    g = rng.standard_normal((count, k))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sphere_sequence(k: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic low-discrepancy points on the unit sphere in R^k.

    Scrambled Halton points are pushed through the Gaussian quantile and
    normalized. For ``k = 1`` the sphere is ``{+1, -1}``.
    """
    if k == 1:
        return np.array([[1.0], [-1.0]])
    halton = scipy.stats.qmc.Halton(d=k, scramble=True, seed=seed)
    p = np.clip(halton.random(count), 1e-12, 1 - 1e-12)
    g = scipy.stats.norm.ppf(p)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


# -- wideness -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WidenessCertificate:
    """Estimated ``Vol(B cap delta Ball) / Vol(delta Ball)`` with its standard error."""

    delta: float
    gamma_estimate: float
    samples: int
    analytic_lower_bound: float

    @property
    def standard_error(self) -> float:
        p = self.gamma_estimate
        return float(np.sqrt(p * (1 - p) / self.samples))

    def conservative_gamma(self, sigmas: float = 3.0) -> float:
        """Estimate minus ``sigmas`` standard errors, floored at 1/samples."""
        return max(self.gamma_estimate - sigmas * self.standard_error, 1.0 / self.samples)


def analytic_wideness_bound(spec: PseudoBallSpec, delta: float) -> float:
    if isinstance(spec, WeightedSlab):
        # Markov bound on the gauge over the sphere of radius delta; valid for M in Theta.
        return max(0.0, 1.0 - 72.0 * delta / (spec.t * np.sqrt(np.pi)))
    # Markov with E (w.eta)^2 = |w|^2 delta^2 / (k + 2) for eta uniform in delta Ball.
    k = spec.dim
    return max(0.0, 1.0 - np.linalg.norm(spec.w) * delta / (spec.epsilon * np.sqrt(k + 2)))


def volume_fraction(spec: PseudoBallSpec, delta: float, samples: int = 100_000, seed: int = 0) -> WidenessCertificate:
    """Monte Carlo estimate of the fraction of ``delta Ball`` inside the pseudo-ball."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if samples < 1000:
        raise ValueError("use at least 1000 samples")
    rng = np.random.default_rng(seed)
    inside = 0
    remaining = samples
    while remaining:
        batch = min(remaining, 100_000)
        inside += int(np.count_nonzero(_members(spec, uniform_ball(rng, batch, spec.dim, delta))))
        remaining -= batch
    return WidenessCertificate(delta, inside / samples, samples, analytic_wideness_bound(spec, delta))


# -- aspherical nets ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AsphericalNet:
    centers: np.ndarray
    perturbed: np.ndarray
    delta: float
    gamma: float
    spec: PseudoBallSpec
    test_points: int

    def __len__(self) -> int:
        return self.centers.shape[0]

    def size_bound(self) -> float:
        """Upper bound ``gamma^{-1} (5/delta)^k`` on the number of centers."""
        k = self.centers.shape[1]
        return (5.0 / self.delta) ** k / self.gamma


def _sample_half_core(spec, center, delta, rng, max_rejections):
    """Uniform draw from ``center + 1/2 (B cap delta Ball)`` by box rejection."""
    k = center.shape[0]
    rejected = 0
    batch = 256
    while rejected < max_rejections:
        V = rng.uniform(-delta / 2, delta / 2, size=(batch, k))
        ok = np.flatnonzero(_in_half_core(spec, V, delta))
        if ok.size:
            rejected += int(ok[0])
            return center + V[ok[0]]
        rejected += batch
        batch = min(batch * 2, 65_536)
    raise SamplerError(f"no sample accepted after {max_rejections} rejections")


def build_aspherical_net(
    spec: PseudoBallSpec,
    delta: float,
    sphere_test_points: int | None = None,
    seed: int = 0,
    gamma: float | None = None,
    max_centers: int = 200_000,
    max_rejections: int = 1_000_000,
) -> AsphericalNet:
    """Greedy aspherical net on the unit sphere.

    The first center is ``e_1``. The candidate stream is a fixed low-discrepancy
    sphere sequence of ``sphere_test_points`` points (default ``10^4 k``); each
    candidate not yet covered by ``x_j + 1/2 (B cap delta Ball)`` for an earlier
    center becomes the next center. The stream doubles as the coverage test set,
    so every test point is covered when the pass ends. Each center is then
    perturbed by a uniform sample from its own translate.

    ``gamma`` defaults to the conservative wideness estimate from
    :func:`volume_fraction` and only feeds :meth:`AsphericalNet.size_bound`.
    """
    k = spec.dim
    if not 1 <= k <= 6:
        raise ValueError("net construction is limited to 1 <= k <= 6")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if sphere_test_points is None:
        sphere_test_points = 10_000 * k
    rng = np.random.default_rng(seed)
    candidates = sphere_sequence(k, sphere_test_points, seed=seed)
    first = np.zeros(k)
    first[0] = 1.0
    covered = np.zeros(candidates.shape[0], dtype=bool)

    centers = []
    nxt = first
    while nxt is not None:
        centers.append(nxt)
        if len(centers) > max_centers:
            raise NetConstructionError(
                f"sphere not covered after {max_centers} centers; "
                f"{np.count_nonzero(~covered)} test points remain"
            )
        covered |= _in_half_core(spec, candidates - nxt, delta)
        idx = np.flatnonzero(~covered)
        nxt = candidates[idx[0]] if idx.size else None

    centers = np.array(centers)
    perturbed = np.array([_sample_half_core(spec, c, delta, rng, max_rejections) for c in centers])
    if gamma is None:
        gamma = volume_fraction(spec, delta, samples=100_000, seed=seed).conservative_gamma()
    return AsphericalNet(centers, perturbed, float(delta), float(gamma), spec, int(sphere_test_points))


def net_covers(net: AsphericalNet, points, chunk: int = 2048) -> np.ndarray:
    """Per point: is it inside ``y_j + B`` for some perturbed center ``y_j``?"""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(P.shape[0], dtype=bool)
    for start in range(0, P.shape[0], chunk):
        block = P[start : start + chunk]
        hit = np.zeros(block.shape[0], dtype=bool)
        for y in net.perturbed:
            hit |= _members(net.spec, block - y)
            if hit.all():
                break
        out[start : start + chunk] = hit
    return out


def net_overlaps(net: AsphericalNet) -> int:
    """Count center pairs whose difference lies in ``1/2 (B cap delta Ball)``.

    Zero means the quarter-size translates around the centers are pairwise disjoint.
    """
    count = 0
    X = net.centers
    for j in range(1, X.shape[0]):
        count += int(np.count_nonzero(_in_half_core(net.spec, X[:j] - X[j], net.delta)))
    return count


# -- pseudo-Lipschitz behaviour of the smoothed quadratic form -------------------


def smoothed_form(M, x, y, u, epsilon: float) -> float:
    """``(1/n) u^T G_{M,-eps}(x, y) u`` using the upper smoothed step."""
    M = np.asarray(M, dtype=float)
    h = smoothed_step(M @ x, epsilon, "upper") * smoothed_step(M @ y, epsilon, "upper")
    return float(h @ (M @ u) ** 2 / M.shape[0])


def _batched_form(M, X, Y, U, epsilon):
    n = M.shape[0]
    hx = smoothed_step(X @ M.T, epsilon, "upper")
    hy = smoothed_step(Y @ M.T, epsilon, "upper")
    return np.einsum("pi,pi->p", hx * hy, (U @ M.T) ** 2) / n


def _sample_in_ball(spec: WeightedSlab, rng, count, max_rejections):
    """Random members of the weighted slab, radially scaled via the gauge.

    Roughly a quarter of the draws sit on the boundary (gauge exactly 1 up to rounding).
    """
    k = spec.dim
    D = uniform_sphere(rng, count, k)
    g = gauge(spec, D)
    scale = rng.random(count)
    scale[rng.random(count) < 0.25] = 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        V = np.where(g[:, None] > 0, D * (scale / g)[:, None], D)
    bad = ~_members(spec, V)
    tries = 0
    while bad.any():
        # Rounding can push a boundary draw just outside; shrink and recheck.
        V[bad] *= 1 - 1e-12
        bad = ~_members(spec, V)
        tries += int(np.count_nonzero(bad))
        if tries > max_rejections:
            raise SamplerError("could not place perturbations inside the pseudo-ball")
    return V


def pseudo_lipschitz_check(M, u, epsilon: float, trials: int = 1000, seed: int = 0,
                           max_rejections: int = 1_000_000) -> float:
    """Largest ``|f_M(x, y) - f_M(x', y')|`` when ``x - x'`` and ``y - y'`` lie in ``B_{M, eps^2/4, u}``.

    ``f_M(x, y) = (1/n) u^T G_{M,-eps}(x, y) u``. For every M the result stays below
    ``epsilon``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    u = np.asarray(u, dtype=float)
    if u.shape != (M.shape[1],):
        raise ValueError("u must match the column count of M")
    if trials < 1:
        return 0.0
    rng = np.random.default_rng(seed)
    k = M.shape[1]
    spec = WeightedSlab(M, epsilon**2 / 4, u)
    X = uniform_sphere(rng, trials, k)
    Y = uniform_sphere(rng, trials, k)
    U = np.broadcast_to(u, (trials, k))
    if not np.any(spec._row_weights):
        return 0.0  # the form is identically zero
    dX = _sample_in_ball(spec, rng, trials, max_rejections)
    dY = _sample_in_ball(spec, rng, trials, max_rejections)
    before = _batched_form(M, X, Y, U, epsilon)
    after = _batched_form(M, X - dX, Y - dY, U, epsilon)
    return float(np.max(np.abs(before - after)))


# -- uniform concentration -----------------------------------------------------


def sample_theta_matrix(n: int, k: int, rng: np.random.Generator, max_rejections: int = 1000) -> np.ndarray:
    """Draw from the N(0, 1) law of an n x k matrix conditioned on ``in_theta``.

    The row-norm constraint is a product event over independent rows, so each
    row is drawn by its own rejection loop; the operator-norm constraint is then
    enforced by rejecting whole matrices. Together this is exact conditioning,
    and it stays tractable where whole-matrix rejection is hopeless (for k = 8,
    n = 1600 a raw Gaussian matrix meets the row bound with probability ~1e-30).
    """
    limit = 2 * k
    for _ in range(max_rejections):
        W = rng.standard_normal((n, k))
        bad = np.flatnonzero(np.einsum("ij,ij->i", W, W) > limit)
        redraws = 0
        while bad.size:
            redraws += bad.size
            if redraws > max_rejections * n:
                raise SamplerError(f"row rejection cap hit at n={n}, k={k}")
            W[bad] = rng.standard_normal((bad.size, k))
            bad = bad[np.einsum("ij,ij->i", W[bad], W[bad]) > limit]
        if in_theta(W):
            return W
    raise SamplerError(f"no Theta member in {max_rejections} draws at n={n}, k={k}")


@dataclass(frozen=True, eq=False)
class ConcentrationResult:
    n: int
    k: int
    epsilon: float
    seeds: tuple[int, ...]
    max_deviation: np.ndarray
    threshold: float | None

    @property
    def exceed_fraction(self) -> float | None:
        if self.threshold is None:
            return None
        return float(np.mean(self.max_deviation > self.threshold))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["seed", "n", "k", "epsilon", "max_deviation"])
        for s, dev in zip(self.seeds, self.max_deviation):
            writer.writerow([s, self.n, self.k, repr(float(self.epsilon)), repr(float(dev))])
        return buf.getvalue()


def concentration_deviation(W, X, Y, U, epsilon: float) -> np.ndarray:
    """``(1/n) u^T G_{W,-eps}(x, y) u - u^T Q_{x,y} u`` for each row triple."""
    return _batched_form(np.asarray(W, dtype=float), X, Y, U, epsilon) - q_quadratic_form(X, Y, U)


def uniform_concentration_experiment(
    k: int,
    n: int,
    epsilon: float,
    matrix_trials: int,
    pair_trials: int,
    seed: int = 0,
    threshold: float | None = None,
    max_rejections: int = 1000,
) -> ConcentrationResult:
    """Per Theta-conditioned Gaussian matrix, the largest sampled smoothed-form excess over Q."""
    if n < k:
        raise ValueError("need n >= k")
    root = np.random.SeedSequence(seed)
    seeds, maxima = [], []
    for child in root.spawn(matrix_trials):
        trial_seed = int(child.generate_state(1, np.uint64)[0])
        rng = np.random.default_rng(trial_seed)
        W = sample_theta_matrix(n, k, rng, max_rejections)
        X = uniform_sphere(rng, pair_trials, k)
        Y = uniform_sphere(rng, pair_trials, k)
        U = uniform_sphere(rng, pair_trials, k)
        seeds.append(trial_seed)
        maxima.append(float(np.max(concentration_deviation(W, X, Y, U, epsilon))))
    return ConcentrationResult(n, k, float(epsilon), tuple(seeds), np.array(maxima), threshold)
