"""Renewal sampling grids and the mean age of the held control.

Between two sampling instants the control is frozen, so at time t it is
"s - pi(s)" old.  Averaged over a long window that age settles at
M = E[xi^2] / (2 E[xi]), which depends on the spread of the inter-arrival
law and not just on its mean.
"""

from __future__ import annotations

import numpy as np

from randhold import Deterministic, Exponential, Gamma, Uniform, constants_of, mean_age_integral, sample_grid

n, T = 500, 2.0

# Same mean for the first three laws, different spread
laws = [Deterministic(1.0), Uniform(0.0, 2.0), Exponential(1.0), Gamma(0.5, 2.0)]

print(f"{'law':<28}{'M':>8}{'n*age/T':>10}{'points':>8}")
for law in laws:
    ages = []
    for rep in range(200):
        grid = sample_grid(law, n, T, seed=1, replication=rep)
        ages.append(n * mean_age_integral(grid) / T)
    print(f"{str(law):<28}{constants_of(law).M:>8.3f}{np.mean(ages):>10.3f}{grid.count:>8d}")

# A grid at rate n over [0, T] is the unit-rate grid over [0, nT], rescaled
g = sample_grid(Exponential(1.0), 64, 1.0, seed=7)
h = sample_grid(Exponential(1.0), 1, 64.0, seed=7)
print("\ncounts at (n=64, T=1) and (n=1, T=64):", g.count, h.count)
print("first sampling instants:", np.round(g.times[:5], 4))
