"""The expectation matrix Q_{x,y} and how fast Gaussian layers approach it.

For Gaussian W the matrix (1/n) W_{+,x}^T W_{+,y} concentrates around
Q_{x,y} = ((pi - theta) / 2 pi) I + (sin theta / 2 pi) M_{x,y}. The weight
distribution deviation is the worst gap over directions; it shrinks as the
layer gets wider.

Run: python demos/02_expectation_and_wdc.py
"""
import numpy as np

from genprior.network import active_submatrix
from genprior.wdc import q_matrix, sample_pairs, wdc_deviation

x, y = np.array([1.0, 0.0]), np.array([0.0, 1.0])
print("Q for orthogonal unit vectors:\n", np.round(q_matrix(x, y).matrix, 4))

rng = np.random.default_rng(0)
W = rng.standard_normal((200_000, 2))
empirical = active_submatrix(W, x).T @ active_submatrix(W, y) / W.shape[0]
print("empirical mean over 200k rows:\n", np.round(empirical, 4))

k = 10
print(f"\nmedian deviation over 10 matrices, k = {k}, 200 sampled direction pairs:")
for n in (20, 100, 1000, 5000):
    devs = []
    for s in range(10):
        r = np.random.default_rng(s)
        devs.append(wdc_deviation(r.standard_normal((n, k)), sample_pairs(k, 200, r)).max_deviation)
    print(f"  n = {n:5d}: {np.median(devs):.3f}")
