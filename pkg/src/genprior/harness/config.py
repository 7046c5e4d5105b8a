"""Experiment configuration: YAML text validated against ``schema.json``.

A config names an experiment ``kind``, a ``trial_count``, an optional
``master_seed`` and two parameter maps. Every parameter of a kind has a
default; ``params`` overrides it with a single value and ``grid`` sweeps it over
a list. The sweep is the Cartesian product of the grid lists, taken in the
order the keys appear in the file. See ``docs/config.md`` for the grammar.
"""
from __future__ import annotations

import copy
import itertools
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import yaml

__all__ = ["KINDS", "DEFAULTS", "ConfigError", "ExperimentConfig", "parse_config", "load_config", "schema"]


class ConfigError(ValueError):
    """Raised for any malformed or inconsistent experiment configuration."""


KINDS = (
    "wdc_sweep",
    "expansion_phase",
    "recovery_sweep",
    "collision_demo",
    "net_demo",
    "rric_sweep",
    "landscape",
)

# Defaults are desk-scale: each kind finishes in seconds with its default grid.
DEFAULTS: dict[str, dict[str, Any]] = {
    "wdc_sweep": {"dims": [10, 100], "pairs": 500, "normalized": True},
    "expansion_phase": {"k": 4, "ratio": 10.0, "epsilon": 0.2, "pairs": 200},
    "recovery_sweep": {
        "dims": [5, 50, 250],
        "m": 100,
        "noise": 0.0,
        "noise_model": "fixed",
        "restarts": 10,
        "step_rule": "local",
        "max_iterations": 20000,
        "negation_check": True,
        "success_tolerance": 1e-3,
    },
    "collision_demo": {"k": 4, "rows": None},
    "net_demo": {"k": 2, "delta": 0.5, "epsilon": 0.25, "test_points": None, "coverage_points": 10000},
    "rric_sweep": {"dims": [5, 50, 250], "m": 100, "quadruples": 500},
    "landscape": {
        "dims": [2, 50, 250],
        "m": 100,
        "starts": 50,
        "negation_check": False,
        "step_rule": "local",
        "max_iterations": 5000,
    },
}

DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "wdc_sweep": {"dims": [[10, 20], [10, 100], [10, 1000]]},
    "expansion_phase": {"k": [2, 4], "ratio": [2.0, 10.0, 50.0]},
    "recovery_sweep": {"noise": [0.0, 0.05, 0.1]},
    "collision_demo": {"k": [1, 2, 4, 8]},
    "net_demo": {"k": [1, 2], "delta": [0.3, 0.5]},
    "rric_sweep": {"m": [10, 200]},
    "landscape": {},
}

_MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    trial_count: int
    master_seed: int
    grid: tuple[tuple[str, tuple], ...]
    params: dict

    def grid_points(self) -> list[dict]:
        """Swept values per grid position, in sweep order."""
        names = [name for name, _ in self.grid]
        return [dict(zip(names, combo)) for combo in itertools.product(*(vals for _, vals in self.grid))]

    def resolve(self, point: dict) -> dict:
        """Full parameter set at one grid position."""
        full = copy.deepcopy(self.params)
        full.update(copy.deepcopy(point))
        return full

    @property
    def swept(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.grid)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        if not 0 <= seed <= _MAX_SEED:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return ExperimentConfig(self.kind, self.trial_count, int(seed), self.grid, self.params)


def schema() -> dict:
    return json.loads(resources.files("genprior.harness").joinpath("schema.json").read_text())


def _check_point(kind: str, p: dict) -> None:
    """Preconditions of the module each kind drives."""

    def fail(msg):
        raise ConfigError(f"{kind}: {msg} (at {p})")

    if kind == "wdc_sweep":
        if len(p["dims"]) != 2:
            fail("dims must be [k, n]")
    elif kind == "expansion_phase":
        if p["ratio"] < 1:
            fail("ratio must be at least 1")
    elif kind == "collision_demo":
        rows = p["rows"] if p["rows"] is not None else 2 * p["k"] - 1
        if rows > 2 * p["k"] - 1:
            fail("rows must not exceed 2k - 1")
    elif kind == "net_demo":
        if not 1 <= p["k"] <= 6:
            fail("net construction needs 1 <= k <= 6")
        if not 0 < p["delta"] < 1:
            fail("delta must lie in (0, 1)")
    if kind in ("recovery_sweep", "rric_sweep", "landscape") and len(p["dims"]) < 2:
        fail("dims must list at least a latent and an output width")


def parse_config(data: Any) -> ExperimentConfig:
    """Validate a decoded config mapping and resolve defaults."""
    try:
        jsonschema.validate(data, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    kind = data["kind"]
    params = copy.deepcopy(DEFAULTS[kind])
    params.update(copy.deepcopy(data.get("params", {})))
    grid_map = data["grid"] if "grid" in data else DEFAULT_GRIDS[kind]
    overlap = set(grid_map) & set(data.get("params", {}))
    if overlap:
        raise ConfigError(f"parameters both fixed and swept: {sorted(overlap)}")
    grid = tuple((name, tuple(copy.deepcopy(vals))) for name, vals in grid_map.items())
    cfg = ExperimentConfig(kind, int(data["trial_count"]), int(data.get("master_seed", 0)), grid, params)
    for point in cfg.grid_points():
        _check_point(kind, cfg.resolve(point))
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read a YAML (or JSON, which is valid YAML) config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    return parse_config(data)


def default_config(kind: str, trial_count: int = 3, master_seed: int = 0) -> ExperimentConfig:
    return parse_config({"kind": kind, "trial_count": trial_count, "master_seed": master_seed})
