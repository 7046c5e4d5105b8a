"""Pseudo-balls, their volume inside a small ball, and aspherical nets built from them.

A thin slab {|w . v| <= eps} is far from a Euclidean ball, yet it still captures
a constant fraction of a ball of radius delta. That is enough to cover the
sphere with few translates.

Run: python demos/04_pseudo_balls_and_nets.py
"""
import numpy as np

from genprior.pseudolip import (
    Slab,
    WeightedSlab,
    build_aspherical_net,
    net_covers,
    net_overlaps,
    sample_theta_matrix,
    uniform_sphere,
    volume_fraction,
)

spec = Slab([1.0, 0.0], 0.15)
cert = volume_fraction(spec, 0.3, samples=100_000, seed=0)
print(f"slab of half-width 0.15 fills {cert.gamma_estimate:.3f} of the radius-0.3 disk "
      f"(+- {cert.standard_error:.3f}); Markov floor {cert.analytic_lower_bound:.3f}")

for k in (2, 3):
    net = build_aspherical_net(Slab(np.eye(k)[0], 0.15), 0.3, seed=k)
    fresh = uniform_sphere(np.random.default_rng(k), 10_000, k)
    print(f"k={k}: {len(net)} centers (bound {net.size_bound():.0f}), "
          f"coverage of fresh sphere points {net_covers(net, fresh).mean():.4f}, overlaps {net_overlaps(net)}")

eps = 0.2
rng = np.random.default_rng(1)
M = sample_theta_matrix(100, 4, rng)
u = uniform_sphere(rng, 1, 4)[0]
weighted = WeightedSlab(M, eps**2, u)
cert = volume_fraction(weighted, eps**2 / 82, samples=100_000, seed=1)
print(f"weighted slab from a well-conditioned 100x4 matrix: fraction {cert.gamma_estimate:.3f} (>= 1/2 expected)")
