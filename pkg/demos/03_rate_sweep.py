"""Measure a convergence rate the way the CLI does, without touching disk.

Noise is switched down to eps = n^-2 so the sup-norm error is pure sampling
error, which shrinks like 1/n.
"""

from __future__ import annotations

from randhold import ExperimentConfig, Exponential, Regime, run_sweep

cfg = ExperimentConfig(
    model="linear",
    system="S2",
    dist=Exponential(1.0),
    regime=Regime("R3", exponent=2.0),
    n_values=(64, 128, 256, 512, 1024),
    replications=64,
    metrics=("lln:1", "regime3"),
    seed=11,
)
report = run_sweep(cfg, threads=2)

for p in report.points:
    print(f"{p.metric:<8} n={p.n:5d}  mean={p.mean:.3e}  se={p.stderr:.1e}")
for name, fit in report.fits.items():
    print(f"{name}: slope {fit.slope:.3f} +/- {fit.slope_se:.3f}, R^2 {fit.r2:.4f}")
