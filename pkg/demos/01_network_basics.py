"""Random ReLU networks: forward passes, activation patterns and the active-product matrix.

Run: python demos/01_network_basics.py
"""
import numpy as np

from genprior.network import active_submatrix, forward, hidden_trace, sample_gaussian_network

net = sample_gaussian_network([4, 40, 200], "one_over_rows", seed=0)
print(f"network widths {net.dims}, depth {net.depth}")

x = np.random.default_rng(1).standard_normal(4)
g = forward(net, x)
print(f"|G(x)| = {np.linalg.norm(g):.4f}, fraction of active outputs = {np.mean(g > 0):.2f}")

# Along a ray the activation pattern is frozen, so G is linear there.
for alpha in (0.5, 1.0, 3.0):
    print(f"  G({alpha} x) / {alpha} matches G(x): {np.allclose(forward(net, alpha * x) / alpha, g)}")

# The accumulated product of active submatrices reproduces G(x) exactly.
trace = hidden_trace(net, x)
print(f"max |P x - G(x)| = {np.max(np.abs(trace.active_products @ x - g)):.2e}")

W = net.weights[0]
rows_on = np.count_nonzero(np.any(active_submatrix(W, x) != 0, axis=1))
print(f"first layer: {rows_on} of {W.shape[0]} rows active at x, about half as expected")
