"""Measurement models, empirical risk, descent-based recovery and landscape scans.

The observation is ``y = A G(x*) + e`` (or a phaseless / one-bit variant of it)
and recovery minimizes the empirical risk ``f(x) = 1/2 ||A G(x) - y||^2`` by
fixed-step subgradient descent with a per-iteration negation check: whenever
``f(-x) < f(x)`` the iterate jumps to ``-x``. The check removes the spurious
basin around a negative multiple of ``x*`` that plain descent can fall into.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .network import GenerativeNetwork, forward, hidden_trace
from .wdc import operator_norm

__all__ = [
    "Linear",
    "NoisyLinear",
    "GaussianNoise",
    "Phaseless",
    "OneBit",
    "MeasurementModel",
    "RecoveryConfig",
    "RecoveryResult",
    "RricReport",
    "Cluster",
    "LandscapeSummary",
    "measure",
    "empirical_risk",
    "risk_subgradient",
    "default_step_size",
    "local_step_size",
    "recover",
    "rric_deviation",
    "landscape_scan",
    "latent_grid",
]


# -- measurement models -----------------------------------------------------


def _as_matrix(A) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    A.setflags(write=False)
    return A


@dataclass(frozen=True, eq=False)
class Linear:
    A: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A))


@dataclass(frozen=True, eq=False)
class NoisyLinear:
    A: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A))
        e = np.asarray(self.e, dtype=float)
        if e.shape != (self.A.shape[0],):
            raise ValueError("noise vector length must equal the number of measurements")
        object.__setattr__(self, "e", e)


@dataclass(frozen=True, eq=False)
class GaussianNoise:
    A: np.ndarray
    sigma: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A))
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    def noise(self) -> np.ndarray:
        return self.sigma * np.random.default_rng(self.seed).standard_normal(self.A.shape[0])


@dataclass(frozen=True, eq=False)
class Phaseless:
    A: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A))


@dataclass(frozen=True, eq=False)
class OneBit:
    """``y = sign(A G(x*) + xi + tau)`` with ``sign(0) = +1``.

    ``scale`` is the dither amplitude used by the correlation loss in
    :func:`landscape_scan`; it defaults to ``max |tau|`` (or 1 without dither).
    """

    A: np.ndarray
    tau: np.ndarray
    xi: np.ndarray
    scale: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A))
        m = self.A.shape[0]
        for name in ("tau", "xi"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (m,):
                raise ValueError(f"{name} must have length {m}")
            object.__setattr__(self, name, v)
        if self.scale is None:
            amp = float(np.max(np.abs(self.tau))) if m else 0.0
            object.__setattr__(self, "scale", amp if amp > 0 else 1.0)


MeasurementModel = Union[Linear, NoisyLinear, GaussianNoise, Phaseless, OneBit]
_SQUARED_LOSS_MODELS = (Linear, NoisyLinear, GaussianNoise)


def _check_model(model, net: GenerativeNetwork) -> None:
    if model.A.shape[1] != net.output_dim:
        raise ValueError(
            f"measurement matrix has {model.A.shape[1]} columns, network outputs {net.output_dim}"
        )


def measure(model: MeasurementModel, net: GenerativeNetwork, x_star) -> np.ndarray:
    """Observation vector for latent ``x_star`` under ``model``."""
    _check_model(model, net)
    z = model.A @ forward(net, x_star)
    if isinstance(model, Linear):
        return z
    if isinstance(model, NoisyLinear):
        return z + model.e
    if isinstance(model, GaussianNoise):
        return z + model.noise()
    if isinstance(model, Phaseless):
        return np.abs(z)
    if isinstance(model, OneBit):
        return np.where(z + model.xi + model.tau >= 0, 1.0, -1.0)
    raise TypeError(f"unknown measurement model {type(model).__name__}")


# -- risk -----------------------------------------------------------------------


def _check_shapes(net, A, y):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    y = np.asarray(y, dtype=float)
    if A.shape[1] != net.output_dim or y.shape != (A.shape[0],):
        raise ValueError(f"shape mismatch: A {A.shape}, y {y.shape}, network output {net.output_dim}")
    return A, y


def empirical_risk(net: GenerativeNetwork, A, y, x) -> float:
    """``1/2 ||A G(x) - y||^2``."""
    A, y = _check_shapes(net, A, y)
    r = A @ forward(net, x) - y
    return 0.5 * float(r @ r)


def risk_subgradient(net: GenerativeNetwork, A, y, x) -> np.ndarray:
    """``(prod_i W^(i)_{+,x^(i)})^T A^T (A G(x) - y)`` with strict activation rule."""
    A, y = _check_shapes(net, A, y)
    P = hidden_trace(net, x).active_products
    return P.T @ (A.T @ (A @ (P @ np.asarray(x, dtype=float)) - y))


class _Objective:
    """Loss and subgradient by back-propagation through the active masks."""

    def __init__(self, net: GenerativeNetwork, model: MeasurementModel, y):
        _check_model(model, net)
        self.weights = net.weights
        self.A = model.A
        self.y = np.asarray(y, dtype=float)
        if self.y.shape != (self.A.shape[0],):
            raise ValueError("observation length does not match the measurement matrix")
        self.model = model
        if isinstance(model, OneBit):
            self._aty = model.scale * (self.A.T @ self.y)

    def _forward(self, x):
        masks = []
        h = x
        for w in self.weights:
            pre = w @ h
            mask = pre > 0
            masks.append(mask)
            h = np.where(mask, pre, 0.0)
        return h, masks

    def _backward(self, g, masks):
        for w, mask in zip(reversed(self.weights), reversed(masks)):
            g = w.T @ np.where(mask, g, 0.0)
        return g

    def loss(self, x) -> float:
        out, _ = self._forward(x)
        return self._loss_from_output(out)

    def _loss_from_output(self, out):
        model = self.model
        if isinstance(model, OneBit):
            return 0.5 * float(out @ out) - float(self._aty @ out)
        z = self.A @ out
        if isinstance(model, Phaseless):
            r = np.abs(z) - self.y
        else:
            r = z - self.y
        return 0.5 * float(r @ r)

    def loss_and_grad(self, x):
        out, masks = self._forward(x)
        model = self.model
        if isinstance(model, OneBit):
            loss = 0.5 * float(out @ out) - float(self._aty @ out)
            g_out = out - self._aty
        else:
            z = self.A @ out
            if isinstance(model, Phaseless):
                r = np.abs(z) - self.y
                g_out = self.A.T @ (r * np.where(z >= 0, 1.0, -1.0))
            else:
                r = z - self.y
                g_out = self.A.T @ r
            loss = 0.5 * float(r @ r)
        return loss, self._backward(g_out, masks)


# -- recovery ------------------------------------------------------------------


@dataclass(frozen=True)
class RecoveryConfig:
    """Descent settings.

    ``step_size=None`` picks the step from ``step_rule``: ``"global"`` uses
    :func:`default_step_size`; ``"local"`` uses ``1 / ||A P||^2`` where ``P`` is the
    active-product matrix at each restart's starting point, i.e. the exact
    smoothness constant of the risk on that linear region.
    """

    step_size: float | None = None
    step_rule: str = "global"
    max_iterations: int = 20_000
    gradient_tolerance: float = 1e-9
    negation_check: bool = True
    restarts: int = 1
    init_seed: int = 0
    init_scale: float = 1.0
    max_backtracks: int = 60

    def __post_init__(self):
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.max_iterations < 1 or self.restarts < 1:
            raise ValueError("max_iterations and restarts must be at least 1")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.step_rule not in ("global", "local"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")


@dataclass(eq=False)
class RecoveryResult:
    estimate: np.ndarray
    loss_trace: list[float]
    iterate_norms: list[float]
    gradient_norms: list[float]
    converged: bool
    diverged: bool = False
    relative_error: float | None = None
    absolute_error: float | None = None
    iterations: int = 0
    negations: int = 0
    restart: int = 0
    step_size: float = 0.0

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1]

    def to_record(self) -> dict:
        return {
            "estimate": [float(v) for v in self.estimate],
            "final_loss": float(self.final_loss),
            "relative_error": None if self.relative_error is None else float(self.relative_error),
            "absolute_error": None if self.absolute_error is None else float(self.absolute_error),
            "converged": bool(self.converged),
            "diverged": bool(self.diverged),
            "iterations": int(self.iterations),
            "negations": int(self.negations),
            "restart": int(self.restart),
            "step_size": float(self.step_size),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record())

    def trace_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "loss", "gradient_norm"])
        for i, (loss, g) in enumerate(zip(self.loss_trace, self.gradient_norms)):
            writer.writerow([i, repr(float(loss)), repr(float(g))])
        return buf.getvalue()


def default_step_size(net: GenerativeNetwork, A) -> float:
    """``0.25 / (d L)`` with ``L = ||A^T A|| prod_i ||W_i||^2`` from power iteration."""
    L = operator_norm(A) ** 2
    for w in net.weights:
        L *= operator_norm(w) ** 2
    return 0.25 / (net.depth * L) if L > 0 else 1.0


def local_step_size(net: GenerativeNetwork, A, x) -> float:
    """``1 / ||A P_x||^2`` with ``P_x`` the active-product matrix at ``x``."""
    P = hidden_trace(net, x).active_products
    L = operator_norm(np.asarray(A, dtype=float) @ P) ** 2
    return 1.0 / L if L > 0 else default_step_size(net, A)


def _step_for(net, A, x0, config: RecoveryConfig, global_step: float | None) -> float:
    if config.step_size is not None:
        return config.step_size
    if config.step_rule == "local":
        return local_step_size(net, A, x0)
    return global_step


def _descend(obj: _Objective, x0, step, config: RecoveryConfig, negation_check: bool) -> RecoveryResult:
    with np.errstate(invalid="ignore", over="ignore"):
        return _descend_loop(obj, x0, step, config, negation_check)


def _descend_loop(obj, x0, step, config, negation_check):
    x = np.array(x0, dtype=float)
    loss, grad = obj.loss_and_grad(x)
    losses, norms, gnorms = [loss], [float(np.linalg.norm(x))], [float(np.linalg.norm(grad))]
    negations = 0
    converged = diverged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        if not np.isfinite(loss):
            diverged = True
            break
        if negation_check:
            flipped = obj.loss(-x)
            if flipped < loss:
                x = -x
                negations += 1
                loss, grad = obj.loss_and_grad(x)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < config.gradient_tolerance:
            converged = True
            losses.append(loss)
            norms.append(float(np.linalg.norm(x)))
            gnorms.append(gnorm)
            break
        # A step that raises the loss is rejected and the step size halved.
        for _ in range(config.max_backtracks):
            x_new = x - step * grad
            new_loss, new_grad = obj.loss_and_grad(x_new)
            if new_loss <= loss:
                break
            step *= 0.5
        else:
            converged = gnorm < config.gradient_tolerance
            break
        if not np.isfinite(new_loss):
            diverged = True
            break
        stalled = new_loss == loss and np.array_equal(x_new, x)
        x, loss, grad = x_new, new_loss, new_grad
        losses.append(loss)
        norms.append(float(np.linalg.norm(x)))
        gnorms.append(float(np.linalg.norm(grad)))
        if stalled:
            break
    return RecoveryResult(
        estimate=x,
        loss_trace=losses,
        iterate_norms=norms,
        gradient_norms=gnorms,
        converged=converged,
        diverged=diverged,
        iterations=it,
        negations=negations,
        step_size=step,
    )


def _attach_errors(result: RecoveryResult, ground_truth) -> RecoveryResult:
    if ground_truth is None:
        return result
    gt = np.asarray(ground_truth, dtype=float)
    err = float(np.linalg.norm(result.estimate - gt))
    result.absolute_error = err
    norm = float(np.linalg.norm(gt))
    result.relative_error = err / norm if norm > 0 else None
    return result


def recover(
    net: GenerativeNetwork,
    model: MeasurementModel,
    y,
    config: RecoveryConfig = RecoveryConfig(),
    ground_truth=None,
    init=None,
) -> RecoveryResult:
    """Recover a latent vector from ``y`` by subgradient descent on the empirical risk.

    Each restart starts from ``init`` (first restart only, when given) or from
    ``init_scale * N(0, I_k)`` drawn from a stream derived from ``init_seed``.
    The restart with the lowest final loss is returned.
    """
    if not isinstance(model, _SQUARED_LOSS_MODELS):
        raise ValueError(f"descent recovery supports linear models only, not {type(model).__name__}")
    obj = _Objective(net, model, y)
    global_step = default_step_size(net, model.A) if config.step_size is None else None
    streams = np.random.SeedSequence(config.init_seed).spawn(config.restarts)
    best = None
    for r, stream in enumerate(streams):
        if r == 0 and init is not None:
            x0 = np.asarray(init, dtype=float)
        else:
            x0 = config.init_scale * np.random.default_rng(stream).standard_normal(net.latent_dim)
        step = _step_for(net, model.A, x0, config, global_step)
        res = _descend(obj, x0, step, config, config.negation_check)
        res.restart = r
        if best is None or _better(res, best):
            best = res
    return _attach_errors(best, ground_truth)


def _better(a: RecoveryResult, b: RecoveryResult) -> bool:
    if a.diverged != b.diverged:
        return not a.diverged
    return a.final_loss < b.final_loss


# -- range restricted isometry -------------------------------------------------------


@dataclass(frozen=True)
class RricReport:
    max_ratio_deviation: float
    quadruples_tested: int

    def to_record(self) -> dict:
        return {
            "max_ratio_deviation": float(self.max_ratio_deviation),
            "quadruples_tested": int(self.quadruples_tested),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record())


def rric_deviation(A, net: GenerativeNetwork, quadruples: int = 1000, seed: int = 0) -> RricReport:
    """Largest sampled ``|a^T (A^T A - I) b| / (|a| |b|)`` over range differences a, b.

    ``a = G(x) - G(y)`` and ``b = G(z) - G(w)`` for Gaussian latent points. Every
    sampled quadruple is also evaluated with ``b = a``, which probes the
    diagonal where the ratio for ``A = 0`` reaches 1.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] != net.output_dim:
        raise ValueError("measurement matrix does not match the network output")
    if quadruples < 1:
        raise ValueError("need at least one quadruple")
    rng = np.random.default_rng(seed)
    k = net.latent_dim
    gram = A.T @ A
    best = -np.inf
    tested = 0
    for _ in range(quadruples):
        x, y, z, w = rng.standard_normal((4, k))
        a = forward(net, x) - forward(net, y)
        b = forward(net, z) - forward(net, w)
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        for u, nu in ((b, nb), (a, na)):
            if na < 1e-10 or nu < 1e-10:
                continue
            ratio = abs(a @ gram @ u - a @ u) / (na * nu)
            best = max(best, ratio)
            tested += 1
    if tested == 0:
        raise ValueError("every sampled quadruple had a vanishing range difference")
    return RricReport(float(best), tested)


# -- landscape --------------------------------------------------------------------


def latent_grid(lo: float, hi: float, points_per_axis: int, k: int) -> np.ndarray:
    """Cartesian grid of start points for ``k <= 3``."""
    if k > 3:
        raise ValueError("grid mode is limited to k <= 3")
    axes = [np.linspace(lo, hi, points_per_axis)] * k
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)


@dataclass(eq=False)
class Cluster:
    center: np.ndarray
    size: int
    loss: float
    kind: str | None = None
    members: list[int] = field(default_factory=list)


@dataclass(eq=False)
class LandscapeSummary:
    clusters: list[Cluster]
    finals: np.ndarray
    losses: np.ndarray
    kinds: list[str | None]
    radius: float
    grid_minima: np.ndarray | None = None

    def fraction(self, *kinds: str) -> float:
        return float(np.mean([k in kinds for k in self.kinds]))


def classify_point(x, x_star, net: GenerativeNetwork, rel_tol: float = 1e-2) -> str:
    """Label a stationary point relative to the truth.

    ``"truth"``: within ``rel_tol ||x*||`` of x*. ``"zero"``: within
    ``rel_tol ||x*||`` of the origin, or G vanishes there. ``"negative"``: its
    direction is within ``rel_tol`` (chord distance) of ``-x*``. Anything else
    is ``"other"``.
    """
    x = np.asarray(x, dtype=float)
    xs = np.asarray(x_star, dtype=float)
    ns = np.linalg.norm(xs)
    g_zero = np.linalg.norm(forward(net, x)) <= 1e-8 * max(1.0, np.linalg.norm(forward(net, xs)))
    if ns == 0:
        return "zero" if g_zero else "other"
    if np.linalg.norm(x - xs) <= rel_tol * ns:
        return "truth"
    nx = np.linalg.norm(x)
    if nx <= rel_tol * ns or g_zero:
        return "zero"
    if np.linalg.norm(x / nx + xs / ns) <= rel_tol:
        return "negative"
    return "other"


def _grid_local_minima(values: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Flat indices of grid points no larger than any axis neighbour, and strictly below one."""
    V = values.reshape(shape)
    is_min = np.ones(shape, dtype=bool)
    strict = np.zeros(shape, dtype=bool)
    for axis in range(V.ndim):
        for shift in (1, -1):
            nb = np.roll(V, shift, axis=axis)
            valid = np.ones(shape, dtype=bool)
            idx = [slice(None)] * V.ndim
            idx[axis] = 0 if shift == 1 else -1
            valid[tuple(idx)] = False
            is_min &= ~valid | (V <= nb)
            strict |= valid & (V < nb)
    return np.flatnonzero((is_min & strict).ravel())


def landscape_scan(
    net: GenerativeNetwork,
    model: MeasurementModel,
    y,
    starts: int | np.ndarray,
    seed: int = 0,
    config: RecoveryConfig | None = None,
    x_star=None,
    grid_shape: Sequence[int] | None = None,
) -> LandscapeSummary:
    """Run descent from many starts and cluster where the iterates end up.

    ``starts`` is either a count of random Gaussian starts or an explicit
    ``(p, k)`` array (e.g. from :func:`latent_grid`). Squared-loss models use
    the empirical risk; ``Phaseless`` uses ``1/2 || |A G(x)| - y ||^2``; ``OneBit``
    uses the dithered correlation loss ``1/2 ||G(x)||^2 - scale * y^T A G(x)``.
    Final iterates closer than ``1e-2 ||x*||`` (``1e-2`` without x*) share a
    cluster. Descent runs without the negation check unless ``config`` says
    otherwise, so spurious basins stay visible.

    When ``grid_shape`` is given, the loss is evaluated on the start grid and the
    indices of its discrete local minima are reported in ``grid_minima``.
    """
    obj = _Objective(net, model, y)
    if config is None:
        config = RecoveryConfig(negation_check=False)
    k = net.latent_dim
    if np.ndim(starts) == 0:
        rng = np.random.default_rng(seed)
        X0 = config.init_scale * rng.standard_normal((int(starts), k))
    else:
        X0 = np.atleast_2d(np.asarray(starts, dtype=float))
        if X0.shape[1] != k:
            raise ValueError("start points must have the latent dimension")
    global_step = default_step_size(net, model.A) if config.step_size is None else None

    finals, losses = [], []
    for x0 in X0:
        step = _step_for(net, model.A, x0, config, global_step)
        res = _descend(obj, x0, step, config, config.negation_check)
        finals.append(res.estimate)
        losses.append(res.final_loss)
    finals = np.array(finals)
    losses = np.array(losses)

    scale = float(np.linalg.norm(x_star)) if x_star is not None else 0.0
    radius = 1e-2 * scale if scale > 0 else 1e-2
    clusters: list[Cluster] = []
    for i, p in enumerate(finals):
        for c in clusters:
            if np.linalg.norm(p - finals[c.members[0]]) < radius:
                c.members.append(i)
                break
        else:
            clusters.append(Cluster(center=p, size=0, loss=0.0, members=[i]))
    kinds = [None] * len(finals)
    for c in clusters:
        c.center = finals[c.members].mean(axis=0)
        c.size = len(c.members)
        c.loss = float(losses[c.members].min())
        if x_star is not None:
            c.kind = classify_point(c.center, x_star, net)
    if x_star is not None:
        kinds = [classify_point(p, x_star, net) for p in finals]
    clusters.sort(key=lambda c: (-c.size, c.members[0]))

    grid_minima = None
    if grid_shape is not None:
        values = np.array([obj.loss(p) for p in X0])
        grid_minima = _grid_local_minima(values, tuple(grid_shape))
    return LandscapeSummary(clusters, finals, losses, kinds, radius, grid_minima)
