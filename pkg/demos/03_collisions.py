"""A layer with at most 2k - 1 rows is never injective, and the collision is explicit.

Pick k rows that span, solve W_S x = -1 so those rows are all inactive, then move
along a null direction of the remaining rows until the first of the k rows
switches on. Both points produce the same output.

Run: python demos/03_collisions.py
"""
import numpy as np

from genprior.network import construct_collision

rng = np.random.default_rng(3)
for k in (1, 2, 4, 8):
    W = rng.standard_normal((2 * k - 1, k))
    x, y = construct_collision(W)
    same = np.max(np.abs(np.maximum(W @ x, 0) - np.maximum(W @ y, 0)))
    B = np.max(np.linalg.norm(W, axis=1))
    print(f"k={k}: |x - y| = {np.linalg.norm(x - y):.3f} >= 1/B = {1 / B:.3f}, output gap {same:.1e}")

print("\nwith 2k rows the construction refuses, e.g. the signed basis is injective:")
try:
    construct_collision(np.vstack([np.eye(2), -np.eye(2)]))
except ValueError as exc:
    print("  ValueError:", exc)
