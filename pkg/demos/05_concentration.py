"""Uniform concentration of the smoothed quadratic form, and its pseudo-Lipschitz behaviour.

f_W(x, y) = (1/n) u^T G_{W,-eps}(x, y) u overestimates u^T Q_{x,y} u by a margin
that shrinks with n. Perturbing x and y inside the weighted slab B_{W,eps^2/4,u}
moves f_W by at most eps, even though such perturbations can be long.

Run: python demos/05_concentration.py
"""
import numpy as np

from genprior.pseudolip import pseudo_lipschitz_check, sample_theta_matrix, uniform_concentration_experiment

for n in (80, 400, 1600):
    res = uniform_concentration_experiment(8, n, 0.1, matrix_trials=10, pair_trials=500, seed=0)
    print(f"k=8, n={n:4d}: median sup excess {np.median(res.max_deviation):.3f}")

rng = np.random.default_rng(0)
M = sample_theta_matrix(100, 4, rng)
u = np.array([1.0, 0.0, 0.0, 0.0])
print(f"largest change under slab perturbations: {pseudo_lipschitz_check(M, u, 0.2, 1000):.4f} (limit 0.2)")
