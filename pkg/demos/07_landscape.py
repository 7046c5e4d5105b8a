"""Where plain descent ends up, with and without the negation check.

Without the check some starts settle in a spurious basin on the far side of the
origin from x*. Comparing f(x) with f(-x) at each step removes it.

Run: python demos/07_landscape.py
"""
import numpy as np

from genprior.network import sample_gaussian_network
from genprior.recover import Linear, RecoveryConfig, landscape_scan, measure

net = sample_gaussian_network([2, 50, 250], "one_over_rows", seed=0)
rng = np.random.default_rng(0)
x_star = rng.standard_normal(2)
A = rng.standard_normal((100, 250)) / 10.0
y = measure(Linear(A), net, x_star)

for check in (False, True):
    cfg = RecoveryConfig(step_rule="local", negation_check=check, max_iterations=5000)
    summ = landscape_scan(net, Linear(A), y, 100, seed=1, config=cfg, x_star=x_star)
    print(f"negation check {check}: {len(summ.clusters)} clusters")
    for c in summ.clusters:
        proj = c.center @ x_star / (x_star @ x_star)
        print(f"   {c.kind:8s} size {c.size:3d}  loss {c.loss:.2e}  <c, x*>/|x*|^2 = {proj:+.3f}")
