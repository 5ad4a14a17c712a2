"""One replication of every trajectory, driven by a single Brownian path.

For the scalar plant x' = x - 2 x(anchor), the ideal closed loop is
x(t) = exp(-t).  The held trajectory lags it by O(1/n); the noisy one adds
an O(eps) fluctuation, and eps * Z follows that fluctuation pathwise.
"""

from __future__ import annotations

import numpy as np

from randhold import Exponential, brownian_path, constants_of, coupled_paths, make_mesh, sample_grid
from randhold.systems import linear_system

sys = linear_system("S1")
law = Exponential(1.0)
M = constants_of(law).M

for n in (64, 256, 1024):
    eps = n ** -0.5  # noise fades slower than sampling accelerates, regime constant 0
    grid = sample_grid(law, n, 1.0, seed=3)
    mesh = make_mesh(1.0, 2**-10, grid)
    W = brownian_path(mesh, 1, seed=3, salt=n)
    p = coupled_paths(sys, grid, mesh, W, eps, 0.0, M)
    dev = p.X - p.x
    print(
        f"n={n:5d} eps={eps:.4f}  sup|xn-x|={np.abs(p.xn - p.x).max():.2e}  "
        f"sup|X-x|={np.abs(dev).max():.2e}  sup|X-x-eps Z|={np.abs(dev - eps * p.Z).max():.2e}"
    )
