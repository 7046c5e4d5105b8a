"""Declarative, seeded experiment sweeps with CSV/JSON reports."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .report import emit_report, render_report
from .runner import derive_seed, run_experiment

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "run_experiment",
    "derive_seed",
    "emit_report",
    "render_report",
]
