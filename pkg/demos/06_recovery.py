"""Recovering a latent code from 100 compressive measurements of a 250-dim output.

Run: python demos/06_recovery.py
"""
import numpy as np

from genprior.network import forward, sample_gaussian_network
from genprior.recover import GaussianNoise, Linear, NoisyLinear, RecoveryConfig, measure, recover

net = sample_gaussian_network([5, 50, 250], "one_over_rows", seed=4)
rng = np.random.default_rng(4)
x_star = rng.standard_normal(5)
A = rng.standard_normal((100, 250)) / 10.0
cfg = RecoveryConfig(step_rule="local", restarts=10)

res = recover(net, Linear(A), measure(Linear(A), net, x_star), cfg, ground_truth=x_star)
print(f"noiseless: relative error {res.relative_error:.1e} after {res.iterations} iterations")

clean = A @ forward(net, x_star)
d = rng.standard_normal(100)
d /= np.linalg.norm(d)
for level in (0.01, 0.05, 0.1):
    e = level * np.linalg.norm(clean) * d
    res = recover(net, NoisyLinear(A, e), clean + e, cfg, ground_truth=x_star)
    print(f"|e| = {level:.2f} |A G(x*)|: relative error {res.relative_error:.4f}")

sigma = 0.02
res = recover(net, GaussianNoise(A, sigma, seed=1), measure(GaussianNoise(A, sigma, seed=1), net, x_star),
              cfg, ground_truth=x_star)
print(f"Gaussian noise sigma={sigma}: relative error {res.relative_error:.4f}")
