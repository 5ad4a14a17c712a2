"""Which sign of the sampling drift matches the simulation?

With noise off, n (xn - x) has a deterministic limit driven by
M * BK (A - BK) x.  Running both signs of that forcing against a direct
simulation on a regular grid shows which one the held system follows.
"""

from __future__ import annotations

import numpy as np

from randhold import Deterministic, ideal_trajectory, make_mesh, q_limit_trajectory, sample_grid, sampled_trajectory
from randhold.systems import linear_system

sys = linear_system("S1")
M = 0.5  # regular unit gaps

mesh_q = make_mesh(1.0, 2**-8)
Q_plus = q_limit_trajectory(sys, mesh_q, M)[-1, 0]
Q_minus = q_limit_trajectory(sys, mesh_q, M, forcing_sign=-1.0)[-1, 0]
print(f"limit at t=1: forcing +1 -> {Q_plus:+.4f}, forcing -1 -> {Q_minus:+.4f}")

for n in (100, 1000, 10000):
    grid = sample_grid(Deterministic(1.0), n, 1.0, seed=0)
    mesh = make_mesh(1.0, 2**-8, grid)
    gap = n * (sampled_trajectory(sys, grid, mesh) - ideal_trajectory(sys, mesh))
    print(f"n={n:6d}: n (xn - x)(1) = {gap[-1, 0]:+.4f}")
