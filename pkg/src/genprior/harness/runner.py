"""Run an :class:`ExperimentConfig` as a pool of independent, seeded trials.

Each trial owns the seed
``SeedSequence(master_seed, spawn_key=(crc32(kind), grid_index, trial)).generate_state(1, uint64)``
so its random stream depends only on where it sits in the sweep, never on
scheduling. Rows come back sorted by ``(grid_index, trial)``.
"""
from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from ..network import construct_collision, sample_gaussian_network
from ..pseudolip import Slab, build_aspherical_net, net_covers, net_overlaps, uniform_sphere
from ..recover import (
    GaussianNoise,
    Linear,
    NoisyLinear,
    RecoveryConfig,
    landscape_scan,
    measure,
    recover,
    rric_deviation,
)
from ..network import forward
from ..wdc import in_theta, sample_pairs, wdc_deviation
from .config import ExperimentConfig

__all__ = ["derive_seed", "run_experiment", "OUTPUTS"]


def derive_seed(master_seed: int, kind: str, grid_index: int, trial: int) -> int:
    seq = np.random.SeedSequence(master_seed, spawn_key=(zlib.crc32(kind.encode()), grid_index, trial))
    return int(seq.generate_state(1, np.uint64)[0])


def _sub_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63))


# -- trials ----------------------------------------------------------------------


def _wdc_trial(p: dict, rng: np.random.Generator) -> dict:
    k, n = p["dims"]
    W = rng.standard_normal((n, k))
    if not p["normalized"]:
        W /= np.sqrt(n)
    rep = wdc_deviation(W, sample_pairs(k, p["pairs"], rng), normalized=p["normalized"])
    return {"max_deviation": rep.max_deviation, "pairs_tested": rep.pairs_tested, "in_theta": in_theta(W)}


def _expansion_trial(p: dict, rng: np.random.Generator) -> dict:
    k = p["k"]
    n = int(np.ceil(p["ratio"] * k))
    W = rng.standard_normal((n, k))
    dev = wdc_deviation(W, sample_pairs(k, p["pairs"], rng)).max_deviation
    return {"n": n, "max_deviation": dev, "wdc_holds": bool(dev <= p["epsilon"]), "in_theta": in_theta(W)}


def _instance(p: dict, rng: np.random.Generator):
    dims = list(p["dims"])
    net = sample_gaussian_network(dims, "one_over_rows", seed=_sub_seed(rng))
    m = p["m"]
    A = rng.standard_normal((m, dims[-1])) / np.sqrt(m)
    x_star = rng.standard_normal(dims[0])
    return net, A, x_star


def _recovery_trial(p: dict, rng: np.random.Generator) -> dict:
    net, A, x_star = _instance(p, rng)
    clean = A @ forward(net, x_star)
    level = p["noise"] * float(np.linalg.norm(clean))
    if p["noise_model"] == "gaussian":
        model = GaussianNoise(A, level / np.sqrt(p["m"]), seed=_sub_seed(rng))
    else:
        direction = rng.standard_normal(p["m"])
        model = NoisyLinear(A, level * direction / np.linalg.norm(direction))
    y = measure(model, net, x_star)
    cfg = RecoveryConfig(
        step_rule=p["step_rule"],
        max_iterations=p["max_iterations"],
        negation_check=p["negation_check"],
        restarts=p["restarts"],
        init_seed=_sub_seed(rng),
    )
    res = recover(net, model, y, cfg, ground_truth=x_star)
    return {
        "noise_norm": float(np.linalg.norm(y - clean)),
        "relative_error": res.relative_error,
        "absolute_error": res.absolute_error,
        "final_loss": res.final_loss,
        "iterations": res.iterations,
        "converged": res.converged,
        "success": bool(res.relative_error is not None and res.relative_error <= p["success_tolerance"]),
    }


def _collision_trial(p: dict, rng: np.random.Generator) -> dict:
    k = p["k"]
    rows = p["rows"] if p["rows"] is not None else 2 * k - 1
    W = rng.standard_normal((rows, k))
    x, y = construct_collision(W)
    gap = float(np.max(np.abs(np.maximum(W @ x, 0) - np.maximum(W @ y, 0))))
    bound = 1.0 / float(np.max(np.linalg.norm(W, axis=1)))
    dist = float(np.linalg.norm(x - y))
    full_rank = bool(np.linalg.matrix_rank(W) == k)
    verified = gap <= 1e-9 and (not full_rank or dist >= bound - 1e-9)
    return {
        "rows": rows,
        "full_rank": full_rank,
        "distance": dist,
        "inverse_row_bound": bound,
        "max_output_gap": gap,
        "collision_verified": bool(verified),
    }


def _net_trial(p: dict, rng: np.random.Generator) -> dict:
    k = p["k"]
    w = uniform_sphere(rng, 1, k)[0]
    spec = Slab(w, p["epsilon"])
    net = build_aspherical_net(spec, p["delta"], p["test_points"], seed=_sub_seed(rng) % 2**32)
    fresh = uniform_sphere(rng, p["coverage_points"], k)
    return {
        "net_size": len(net),
        "size_bound": net.size_bound(),
        "gamma": net.gamma,
        "coverage": float(np.mean(net_covers(net, fresh))),
        "overlaps": net_overlaps(net),
    }


def _rric_trial(p: dict, rng: np.random.Generator) -> dict:
    net, A, _ = _instance(p, rng)
    rep = rric_deviation(A, net, p["quadruples"], seed=_sub_seed(rng))
    return {"max_ratio_deviation": rep.max_ratio_deviation, "quadruples_tested": rep.quadruples_tested}


def _landscape_trial(p: dict, rng: np.random.Generator) -> dict:
    net, A, x_star = _instance(p, rng)
    y = measure(Linear(A), net, x_star)
    cfg = RecoveryConfig(
        step_rule=p["step_rule"], max_iterations=p["max_iterations"], negation_check=p["negation_check"]
    )
    summ = landscape_scan(net, Linear(A), y, p["starts"], seed=_sub_seed(rng), config=cfg, x_star=x_star)
    xs2 = float(x_star @ x_star)
    neg = [c for c in summ.clusters if c.kind == "negative"]
    spurious = [c for c in summ.clusters if c.kind in ("negative", "other")]
    return {
        "clusters": len(summ.clusters),
        "fraction_truth": summ.fraction("truth"),
        "fraction_negative": summ.fraction("negative"),
        "fraction_zero": summ.fraction("zero"),
        "fraction_other": summ.fraction("other"),
        # Empirical scale of the spurious negative point: -<c, x*> / |x*|^2.
        "negative_scale": float(-neg[0].center @ x_star / xs2) if neg else None,
        "spurious_projection": float(spurious[0].center @ x_star / xs2) if spurious else None,
    }


TRIALS: dict[str, Callable[[dict, np.random.Generator], dict]] = {
    "wdc_sweep": _wdc_trial,
    "expansion_phase": _expansion_trial,
    "recovery_sweep": _recovery_trial,
    "collision_demo": _collision_trial,
    "net_demo": _net_trial,
    "rric_sweep": _rric_trial,
    "landscape": _landscape_trial,
}

OUTPUTS: dict[str, tuple[str, ...]] = {
    "wdc_sweep": ("max_deviation", "pairs_tested", "in_theta"),
    "expansion_phase": ("n", "max_deviation", "wdc_holds", "in_theta"),
    "recovery_sweep": ("noise_norm", "relative_error", "absolute_error", "final_loss", "iterations",
                       "converged", "success"),
    "collision_demo": ("rows", "full_rank", "distance", "inverse_row_bound", "max_output_gap",
                       "collision_verified"),
    "net_demo": ("net_size", "size_bound", "gamma", "coverage", "overlaps"),
    "rric_sweep": ("max_ratio_deviation", "quadruples_tested"),
    "landscape": ("clusters", "fraction_truth", "fraction_negative", "fraction_zero", "fraction_other",
                  "negative_scale", "spurious_projection"),
}


# -- driver ------------------------------------------------------------------------


def _flat(v):
    if isinstance(v, (list, tuple)):
        return "x".join(str(int(x)) for x in v)
    if isinstance(v, np.generic):
        return v.item()
    return v


def _run_one(kind: str, swept: dict, params: dict, grid_index: int, trial: int, seed: int) -> dict:
    row = {"experiment": kind, "grid_index": grid_index, "trial": trial, "seed": seed}
    row.update({name: _flat(v) for name, v in swept.items()})
    outputs = dict.fromkeys(OUTPUTS[kind])
    try:
        produced = TRIALS[kind](params, np.random.default_rng(seed))
        outputs.update({key: _flat(v) for key, v in produced.items()})
        row["status"], row["error"] = "ok", None
    except Exception as exc:  # a failed trial is reported, never fatal to the sweep
        row["status"], row["error"] = "error", f"{type(exc).__name__}: {exc}"
    row.update(outputs)
    return row


def run_experiment(config: ExperimentConfig, threads: int = 1) -> list[dict]:
    """All trials of ``config`` as flat report rows.

    Row count is the number of grid positions times ``trial_count``; failed
    trials keep their row with ``status = "error"``.
    """
    if threads < 1:
        raise ValueError("threads must be at least 1")
    jobs = []
    for gi, point in enumerate(config.grid_points()):
        params = config.resolve(point)
        for t in range(config.trial_count):
            seed = derive_seed(config.master_seed, config.kind, gi, t)
            jobs.append((config.kind, point, params, gi, t, seed))
    if threads == 1:
        rows = [_run_one(*job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda job: _run_one(*job), jobs))
    rows.sort(key=lambda r: (r["grid_index"], r["trial"]))
    return rows
