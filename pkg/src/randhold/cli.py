"""Command-line front end: ``randhold --verb <check|sweep|path|list-systems>``.

Exit codes: 0 success, 2 bad arguments or configuration, 3 a check or an
expected slope failed, 4 output could not be written, 1 anything else.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time

import numpy as np

from . import lindyn, nonlindyn
from .config import parse_config
from .errors import ConfigError, OutputError, ParameterError, SweepError
from .experiments import check_z_gaussianity, run_checks, run_sweep, slope_failures
from .paths import brownian_path, make_mesh
from .renewal import constants_of, sample_grid
from .reports import emit_reports
from .systems import linear_systems

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_ASSERT, EXIT_IO = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE)


def build_parser():
    p = _Parser(prog="randhold", description="Sample-and-hold Monte Carlo experiments.")
    p.add_argument("--verb", required=True, choices=("check", "sweep", "path", "list-systems"))
    p.add_argument("--config", help="YAML experiment document")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    return p


def _path_csv(cfg):
    """One replication of every coupled trajectory at the smallest ``n``."""
    n = cfg.n_values[0]
    eps = cfg.regime.epsilon(n)
    c = cfg.regime.constant if cfg.regime.kind != "R3" else 0.0
    M = constants_of(cfg.dist).M
    system = cfg.resolve_system()
    grid = sample_grid(cfg.dist, n, cfg.horizon, cfg.seed, 0)
    mesh = make_mesh(cfg.horizon, cfg.mesh_pitch, grid)
    W = brownian_path(mesh, system.dim, cfg.seed, 0, cfg.substeps, salt=n)
    if cfg.model == "linear":
        cp = lindyn.coupled_paths(system, grid, mesh, W, eps, c, M, cfg.forcing_sign)
        traj = {"x": cp.x, "xn": cp.xn, "X": cp.X, "Z": cp.Z, "Q": cp.Q}
    else:
        npth = nonlindyn.nonlinear_paths(system, grid, mesh, W, eps, c, M, cfg.forcing_sign)
        Q = nonlindyn.q_limit_nonlinear(system, npth.y, mesh, M, cfg.forcing_sign)
        traj = {"y": npth.y, "yn": npth.yn, "Y": npth.Y, "Z": npth.Z, "Q": Q}
    d = system.dim
    cols = ["t", "anchor"] + [f"{k}{i}" for k in traj for i in range(d)]
    body = np.column_stack([mesh.points, mesh.anchor.astype(float)] + list(traj.values()))
    lines = [",".join(cols)]
    for row in body:
        lines.append(",".join([repr(float(row[0])), str(int(row[1]))] + [repr(float(v)) for v in row[2:]]))
    return "\n".join(lines) + "\n"


def _run(args):
    if args.verb == "list-systems":
        print("linear:", " ".join(linear_systems()))
        print("nonlinear:", " ".join(nonlindyn.list_systems()))
        return EXIT_OK
    if not args.config:
        raise ConfigError("--config", f"required for verb {args.verb!r}")
    if not args.out:
        raise ConfigError("--out", f"required for verb {args.verb!r}")
    if args.threads < 1:
        raise ConfigError("--threads", "must be at least 1")
    try:
        cfg = parse_config(args.config)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {args.config}: {exc.strerror or exc}") from None
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)

    start = time.perf_counter()
    if args.verb == "check":
        try:
            checks = run_checks(cfg.dist, cfg.n_values[-1], cfg.horizon, cfg.replications, cfg.seed, args.threads)
        except ParameterError as exc:
            raise ConfigError("replications", str(exc)) from None
        if cfg.model == "linear":
            # 5% at R = 10^4; widened to four standard errors of a sample variance for smaller R
            rel = max(0.05, 4.0 * (2.0 / (cfg.replications - 1)) ** 0.5)
            checks.append(check_z_gaussianity(cfg.resolve_system(), cfg.replications, cfg.seed, cfg.horizon,
                                              cfg.mesh_pitch, cfg.substeps, rel, threads=args.threads))
        emit_reports(checks, args.out, seed=cfg.seed, wall_clock=time.perf_counter() - start)
        for c in checks:
            print(f"{c.name}: statistic={c.statistic:.6g} target={c.target:.6g} "
                  f"tol={c.tolerance:.3g} {'PASS' if c.passed else 'FAIL'}")
        return EXIT_OK if all(c.passed for c in checks) else EXIT_ASSERT

    if args.verb == "path":
        text = _path_csv(cfg)
        emit_reports(None, args.out, seed=cfg.seed, wall_clock=time.perf_counter() - start,
                     extra_files={"path.csv": text})
        print(f"wrote {args.out}/path.csv")
        return EXIT_OK

    report = run_sweep(cfg, threads=args.threads)
    manifest = emit_reports(report, args.out, seed=cfg.seed, wall_clock=time.perf_counter() - start)
    for m, f in report.fits.items():
        if f.fitted:
            print(f"{m}: slope={f.slope:.4f} se={f.slope_se:.3g} r2={f.r2:.4f}")
        else:
            print(f"{m}: {f.note}")
    for name, digest in manifest.files.items():
        print(f"{name} sha256={digest}")
    bad = slope_failures(report, cfg.expected_slopes)
    for m in bad:
        print(f"expected slope for {m} in {list(cfg.expected_slopes[m])}: FAIL", file=sys.stderr)
    return EXIT_ASSERT if bad else EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"randhold: config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OutputError as exc:
        print(f"randhold: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    except SweepError as exc:
        print(f"randhold: sweep failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
