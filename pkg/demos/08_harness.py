"""Running a declarative sweep and writing a report, as the CLI does.

Equivalent shell command: genprior wdc-sweep --config configs/wdc_sweep.yaml --out wdc.csv

Run: python demos/08_harness.py
"""
from pathlib import Path

import numpy as np

from genprior.harness import load_config, render_report, run_experiment

config = load_config(Path(__file__).parents[1] / "configs" / "collision.yaml")
rows = run_experiment(config, threads=2)
print(f"{len(rows)} rows, all verified: {all(r['collision_verified'] for r in rows)}")
print(render_report(rows[:3], "csv"))

config = load_config(Path(__file__).parents[1] / "configs" / "rric.yaml")
rows = run_experiment(config)
for m in sorted({r["m"] for r in rows}):
    print(f"m = {m:3d}: median RRIC deviation {np.median([r['max_ratio_deviation'] for r in rows if r['m'] == m]):.3f}")
