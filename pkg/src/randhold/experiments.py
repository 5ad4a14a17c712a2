"""Monte Carlo sweeps along regime curves, rate fits and renewal self-checks.

A sweep walks ``n`` through ``n_values`` with ``eps = eps(n)`` fixed by the
regime, simulates coupled paths for every replication and averages sup-norm
errors.  Replications are processed in fixed-size chunks that are vectorized
across replications; chunks may run on a thread pool, and results are reduced
in replication order so the output never depends on the worker count.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import lindyn, nonlindyn
from .errors import ConfigError, FitError, InvariantError, ParameterError, SweepError
from .linalg import LinearSystem, gramian
from .paths import brownian_path, make_mesh, stack
from .renewal import InterarrivalDistribution, constants_of, mean_age_integral, sample_grid
from .systems import linear_system

# Replications per vectorized batch; fixed so results do not depend on threads.
CHUNK = 32
ABORT_FRACTION = 0.01
MIN_FIT_REPLICATIONS = 30
MIN_FIT_POINTS = 3
ADMISSIBLE_REL_SE = 0.2

_LLN = re.compile(r"^lln:(?P<p>[0-9.eE+-]+)$")


@dataclass(frozen=True)
class Regime:
    """Noise/sampling coupling ``eps(n)``.

    ``R1``: ``eps = n^-(1-delta)``, regime constant 0.
    ``R2``: ``eps = 1/(c n)``, regime constant ``c``.
    ``R3``: ``eps = n^-exponent`` with ``exponent > 1``, so ``n eps -> 0``.
    """

    kind: str
    delta: float | None = None
    c: float | None = None
    exponent: float | None = None

    def __post_init__(self):
        if self.kind not in ("R1", "R2", "R3"):
            raise ConfigError("regime.kind", f"expected R1, R2 or R3, got {self.kind!r}")
        if self.kind == "R1":
            if self.delta is None:
                raise ConfigError("regime.delta", "required")
            if not 0 < self.delta < 1:
                raise ConfigError("regime.delta", f"must lie in (0, 1), got {self.delta!r}")
        if self.kind == "R2":
            if self.c is None:
                raise ConfigError("regime.c", "required")
            if not (math.isfinite(self.c) and self.c > 0):
                raise ConfigError("regime.c", f"must be positive, got {self.c!r}")
        if self.kind == "R3":
            if self.exponent is None:
                object.__setattr__(self, "exponent", 2.0)
            if not self.exponent > 1:
                raise ConfigError("regime.exponent", f"must exceed 1, got {self.exponent!r}")

    @property
    def constant(self):
        """Limit of ``1/(n eps)``; infinite in R3."""
        return {"R1": 0.0, "R2": self.c, "R3": math.inf}[self.kind]

    def epsilon(self, n):
        if self.kind == "R1":
            return float(n) ** -(1.0 - self.delta)
        if self.kind == "R2":
            return 1.0 / (self.c * n)
        return float(n) ** -self.exponent

    def kappa(self, n, eps):
        """``|1/(n eps) - c|``; undefined (NaN) in R3 where the constant is infinite."""
        if self.kind == "R3":
            return math.nan
        return abs(1.0 / (n * eps) - self.constant)

    def to_dict(self):
        out = {"kind": self.kind}
        for key in ("delta", "c", "exponent"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


def parse_metric(name):
    """``"lln:p"`` gives ``("lln", p)``; ``"clt"`` and ``"regime3"`` give ``(name, None)``."""
    if name in ("clt", "regime3"):
        return name, None
    m = _LLN.match(str(name))
    if m:
        try:
            p = float(m.group("p"))
        except ValueError:
            p = math.nan
        if p > 0 and math.isfinite(p):
            return "lln", p
    raise ConfigError("metrics", f"unknown metric {name!r}; use 'lln:<p>', 'clt' or 'regime3'")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Everything a sweep needs; validated on construction."""

    model: str
    system: object
    dist: InterarrivalDistribution
    regime: Regime
    n_values: tuple
    replications: int
    horizon: float = 1.0
    mesh_pitch: float = 2.0**-10
    substeps: int = 8
    seed: int = 0
    metrics: tuple = ("lln:1",)
    forcing_sign: float = 1.0
    expected_slopes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in ("linear", "nonlinear"):
            raise ConfigError("model", f"expected 'linear' or 'nonlinear', got {self.model!r}")
        if not isinstance(self.dist, InterarrivalDistribution):
            raise ConfigError("dist", "must be an inter-arrival distribution")
        if not isinstance(self.regime, Regime):
            raise ConfigError("regime", "must be a Regime")
        ns = tuple(self.n_values)
        if not ns:
            raise ConfigError("n_values", "must not be empty")
        for n in ns:
            if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
                raise ConfigError("n_values", f"entries must be positive integers, got {n!r}")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_values", "must be strictly increasing")
        object.__setattr__(self, "n_values", tuple(int(n) for n in ns))
        R = self.replications
        if isinstance(R, bool) or not isinstance(R, (int, np.integer)) or R < 1:
            raise ConfigError("replications", f"must be a positive integer, got {R!r}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigError("horizon", f"must be positive, got {self.horizon!r}")
        if not (math.isfinite(self.mesh_pitch) and 0 < self.mesh_pitch <= self.horizon):
            raise ConfigError("mesh_pitch", f"must lie in (0, horizon], got {self.mesh_pitch!r}")
        s = self.substeps
        if isinstance(s, bool) or not isinstance(s, int) or s < 1 or s & (s - 1):
            raise ConfigError("substeps", f"must be a power of two, got {s!r}")
        if self.forcing_sign not in (1, -1, 1.0, -1.0):
            raise ConfigError("forcing_sign", f"must be +1 or -1, got {self.forcing_sign!r}")
        metrics = tuple(self.metrics)
        if not metrics:
            raise ConfigError("metrics", "must not be empty")
        if len(set(metrics)) != len(metrics):
            raise ConfigError("metrics", "duplicate entries")
        for name in metrics:
            kind, _ = parse_metric(name)
            if kind == "clt" and self.regime.kind == "R3":
                raise ConfigError("metrics", "'clt' needs regime R1 or R2")
            if kind == "regime3" and self.regime.kind != "R3":
                raise ConfigError("metrics", "'regime3' needs regime R3")
        object.__setattr__(self, "metrics", metrics)
        for name, bounds in self.expected_slopes.items():
            if name not in metrics:
                raise ConfigError("expected_slopes", f"{name!r} is not a requested metric")
            if len(bounds) != 2 or not bounds[0] <= bounds[1]:
                raise ConfigError("expected_slopes", f"{name!r} needs [low, high]")
        for n in self.n_values:
            eps = self.regime.epsilon(n)
            if not 0 < eps <= 1:
                raise ConfigError("regime", f"eps(n={n}) = {eps!r} is outside (0, 1]")
        self.resolve_system()

    def resolve_system(self):
        """The linear or nonlinear system object named by ``system``."""
        try:
            if self.model == "nonlinear":
                if not isinstance(self.system, str):
                    raise ConfigError("system", "nonlinear models take a registered system name")
                return nonlindyn.get_system(self.system)
            if isinstance(self.system, str):
                return linear_system(self.system)
            if isinstance(self.system, dict):
                keys = set(self.system)
                if keys != {"A", "B", "K", "x0"}:
                    raise ConfigError("system", f"matrices need keys A, B, K, x0, got {sorted(keys)}")
                return LinearSystem(**self.system)
        except (ParameterError, InvariantError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("system", str(exc)) from None
        raise ConfigError("system", f"expected a name or a matrix mapping, got {self.system!r}")

    def to_dict(self):
        out = {
            "model": self.model,
            "system": self.system,
            "dist": self.dist.to_dict(),
            "regime": self.regime.to_dict(),
            "n_values": list(self.n_values),
            "replications": int(self.replications),
            "horizon": float(self.horizon),
            "mesh_pitch": float(self.mesh_pitch),
            "substeps": int(self.substeps),
            "seed": int(self.seed),
            "metrics": list(self.metrics),
            "forcing_sign": float(self.forcing_sign),
        }
        if self.expected_slopes:
            out["expected_slopes"] = {k: [float(a), float(b)] for k, (a, b) in self.expected_slopes.items()}
        return out

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.to_dict() == other.to_dict()


def regime_epsilon(regime, n):
    return regime.epsilon(n)


def kappa(regime, n, eps):
    return regime.kappa(n, eps)


@dataclass(frozen=True)
class RatePoint:
    n: int
    epsilon: float
    kappa: float
    metric: str
    mean: float
    stderr: float
    replications: int
    aborted: int = 0

    @property
    def admissible(self):
        return bool(self.mean > 0 and self.stderr < ADMISSIBLE_REL_SE * self.mean)


@dataclass(frozen=True)
class RateFit:
    metric: str
    slope: float | None
    slope_se: float | None
    r2: float | None
    points_used: tuple
    note: str = ""

    @property
    def fitted(self):
        return self.slope is not None


@dataclass(frozen=True)
class RateReport:
    config: dict
    points: tuple
    fits: dict

    def series(self, metric):
        return [p for p in self.points if p.metric == metric]

    def to_dict(self):
        return {
            "config": self.config,
            "points": [vars(p) | {"admissible": p.admissible} for p in self.points],
            "fits": {k: {**vars(f), "points_used": list(f.points_used)} for k, f in self.fits.items()},
        }


@dataclass(frozen=True)
class CheckReport:
    name: str
    statistic: float
    target: float
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self):
        for key in ("statistic", "target", "tolerance"):
            object.__setattr__(self, key, float(getattr(self, key)))
        object.__setattr__(self, "passed", bool(abs(self.statistic - self.target) <= self.tolerance))

    def to_dict(self):
        return {"name": self.name, "statistic": self.statistic, "target": self.target,
                "tolerance": self.tolerance, "passed": self.passed}


# --- rate fitting -----------------------------------------------------------

def fit_rate(points):
    """OLS slope of ``log(mean)`` on ``log(n)``.

    ``points`` holds ``(n, mean)`` or ``(n, mean, stderr)`` tuples.  Returns
    ``(slope, slope_se, r2)``; the standard error comes from the residuals
    and is zero for an exact power law.
    """
    pts = [tuple(p) for p in points]
    if len(pts) < MIN_FIT_POINTS:
        raise FitError(f"need at least {MIN_FIT_POINTS} points, got {len(pts)}")
    n = np.array([p[0] for p in pts], dtype=float)
    mean = np.array([p[1] for p in pts], dtype=float)
    if np.any(~np.isfinite(mean)) or np.any(mean <= 0) or np.any(n <= 0):
        raise FitError("rate fit needs positive n and positive mean errors")
    x, y = np.log(n), np.log(mean)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise FitError("rate fit needs at least two distinct n")
    slope = float(xc @ (y - y.mean())) / sxx
    resid = y - y.mean() - slope * xc
    ssr = float(resid @ resid)
    sst = float((y - y.mean()) @ (y - y.mean()))
    slope_se = math.sqrt(ssr / (len(pts) - 2) / sxx) if len(pts) > 2 else math.nan
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    return slope, slope_se, r2


def _fit_metric(metric, points, replications, note):
    usable = [p for p in points if p.admissible]
    used = tuple(p.n for p in usable)
    if replications < MIN_FIT_REPLICATIONS or len(usable) < MIN_FIT_POINTS:
        why = f"no fit: needs R >= {MIN_FIT_REPLICATIONS} and {MIN_FIT_POINTS} admissible points"
        return RateFit(metric, None, None, None, used, "; ".join(s for s in (why, note) if s))
    slope, se, r2 = fit_rate([(p.n, p.mean, p.stderr) for p in usable])
    return RateFit(metric, slope, se, r2, used, note)


# --- sweeps -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _Job:
    cfg: ExperimentConfig
    system: object
    M: float
    ps: tuple
    want_clt: bool
    want_q: bool


def _chunk_errors(job, n, reps):
    """Per-replication errors for replications ``reps`` at rate ``n``; NaN marks an aborted one."""
    cfg = job.cfg
    eps = cfg.regime.epsilon(n)
    c = cfg.regime.constant if cfg.regime.kind != "R3" else 0.0
    grids = [sample_grid(cfg.dist, n, cfg.horizon, cfg.seed, r) for r in reps]
    meshes = [make_mesh(cfg.horizon, cfg.mesh_pitch, g) for g in grids]
    d = job.system.dim
    paths = [brownian_path(m, d, cfg.seed, r, cfg.substeps, salt=n) for m, r in zip(meshes, reps)]
    st = stack(meshes, paths)
    with np.errstate(all="ignore"):
        if cfg.model == "linear":
            want = ("x", "X") + (("Z",) if job.want_clt else ()) + (("Q",) if job.want_q else ())
            out = lindyn.simulate_stack(job.system, st, eps, c, job.M, cfg.forcing_sign, want)
            errs = lindyn.sup_errors(out["x"], out["X"], out.get("Z"), out.get("Q"), eps, n, job.ps)
        else:
            want = ("y", "Y") + (("Z",) if job.want_clt else ()) + (("Q",) if job.want_q else ())
            out = nonlindyn.simulate_stack(job.system, st, eps, c, job.M, cfg.forcing_sign, want)
            errs = nonlindyn.sup_errors(out["y"], out["Y"], out.get("Z"), out.get("Q"), eps, n, job.ps)
    result = {}
    for name in cfg.metrics:
        kind, p = parse_metric(name)
        result[name] = np.asarray(errs[f"lln_{p:g}"] if kind == "lln" else errs[kind], dtype=float)
    return result


def _map(fn, jobs, threads):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def run_sweep(cfg, threads=1):
    """Run every ``(n, replication)`` of ``cfg`` and fit rates per metric.

    Output is identical for any ``threads``.  A replication whose errors are
    not all finite is aborted; more than 1% aborted at any ``n`` raises
    :class:`SweepError`.
    """
    if not isinstance(cfg, ExperimentConfig):
        raise ParameterError("run_sweep needs an ExperimentConfig")
    threads = int(threads)
    if threads < 1:
        raise ParameterError("threads must be at least 1")
    kinds = [parse_metric(m) for m in cfg.metrics]
    job = _Job(
        cfg=cfg,
        system=cfg.resolve_system(),
        M=constants_of(cfg.dist).M,
        ps=tuple(sorted({p for k, p in kinds if k == "lln"})),
        want_clt=any(k == "clt" for k, _ in kinds),
        want_q=any(k == "regime3" for k, _ in kinds),
    )
    R = cfg.replications
    plan = [(n, range(s, min(s + CHUNK, R))) for n in cfg.n_values for s in range(0, R, CHUNK)]
    chunks = _map(lambda task: _chunk_errors(job, *task), plan, threads)

    points = []
    k = 0
    for n in cfg.n_values:
        per = len(range(0, R, CHUNK))
        block = chunks[k:k + per]
        k += per
        vals = {m: np.concatenate([b[m] for b in block]) for m in cfg.metrics}
        ok = np.logical_and.reduce([np.isfinite(v) for v in vals.values()])
        aborted = int(R - ok.sum())
        if aborted > ABORT_FRACTION * R:
            raise SweepError(f"n={n}: {aborted} of {R} replications aborted")
        eps = cfg.regime.epsilon(n)
        kap = cfg.regime.kappa(n, eps)
        for m in cfg.metrics:
            v = vals[m][ok]
            mean = float(np.mean(v))
            se = float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else math.nan
            points.append(RatePoint(n, eps, kap, m, mean, se, int(len(v)), aborted))

    fits = {}
    for m in cfg.metrics:
        notes = []
        if cfg.model == "nonlinear" and m == "regime3":
            notes.append("extrapolated: nonlinear regime-3 limit used by analogy with the linear case")
        if cfg.regime.kind == "R2" and m == "clt":
            notes.append("regime 2: slope reported against the n^-1/4 envelope, intermediate values not asserted")
        fits[m] = _fit_metric(m, [p for p in points if p.metric == m], R, "; ".join(notes))
    return RateReport(config=cfg.to_dict(), points=tuple(points), fits=fits)


def slope_failures(report, expected):
    """Metrics whose fitted slope is missing or outside ``expected[metric] = (low, high)``."""
    bad = []
    for m, (lo, hi) in expected.items():
        fit = report.fits.get(m)
        if fit is None or not fit.fitted or not lo <= fit.slope <= hi:
            bad.append(m)
    return bad


# --- renewal self-checks ----------------------------------------------------

def _renewal_stats(dist, n, T, seed, reps):
    out = np.empty((len(reps), 3))
    for i, r in enumerate(reps):
        g = sample_grid(dist, n, T, seed, r)
        out[i] = (g.count, np.sum(g.xi), mean_age_integral(g, 1.0))
    return out


def run_checks(dist, n, T, R, seed, threads=1):
    """Wald identity, elementary renewal, Donsker variance and mean age over ``R`` grids.

    Failures are reported through the ``passed`` flags, never raised.
    """
    if not isinstance(dist, InterarrivalDistribution):
        raise ParameterError("run_checks needs an inter-arrival distribution")
    if isinstance(R, bool) or int(R) != R or R < 1000:
        raise ParameterError(f"distributional checks need R >= 1000, got {R!r}")
    if not (math.isfinite(T) and T > 0):
        raise ParameterError(f"T must be positive, got {T!r}")
    R = int(R)
    plan = [range(s, min(s + 256, R)) for s in range(0, R, 256)]
    stats = np.concatenate(_map(lambda reps: _renewal_stats(dist, n, T, seed, reps), plan, threads))
    count, total, age = stats.T
    k = constants_of(dist)
    mu = k.mean
    tiny = 64 * np.finfo(float).eps

    def se(v):
        return float(np.std(v, ddof=1) / math.sqrt(R))

    wald_target = float(np.mean(count + 1)) * mu
    wald = CheckReport(
        "wald", float(np.mean(total)), wald_target,
        4 * se(total - (count + 1) * mu) + tiny * max(1.0, abs(wald_target)),
    )
    level = n * T
    renewal = CheckReport(
        "elementary_renewal", float(np.mean(count)) / level, 1.0 / mu,
        4 * se(count) / level + tiny / mu,
    )
    donsker_target = k.variance * T / mu**3
    donsker = CheckReport(
        "donsker_variance", float(np.var((count - level / mu) / math.sqrt(n), ddof=1)),
        donsker_target, 0.1 * donsker_target,
    )
    age_check = CheckReport("mean_age_M", float(np.mean(n * age / T)), k.M, 0.05 * k.M)
    return [wald, renewal, donsker, age_check]


def _variance_check(samples, target, rel_tol):
    stat = float(np.sum(np.var(samples, axis=0, ddof=1)))
    return CheckReport("z_gaussianity", stat, float(target), rel_tol * float(target))


def check_z_gaussianity(sys, R, seed, T=1.0, h=2.0**-10, substeps=8, rel_tol=0.05, threads=1):
    """Total variance of the fluctuation limit at ``T`` (regime constant 0) against the closed-loop Gramian."""
    mesh = make_mesh(T, h)
    d = sys.dim

    def terminal(reps):
        paths = [brownian_path(mesh, d, seed, r, substeps) for r in reps]
        st = stack([mesh] * len(reps), paths)
        return lindyn.simulate_stack(sys, st, 1.0, 0.0, 1.0, 1.0, want=("Z",))["Z"][:, -1]

    plan = [range(s, min(s + 256, R)) for s in range(0, R, 256)]
    Z = np.concatenate(_map(terminal, plan, threads))
    return _variance_check(Z, np.trace(gramian(sys.closed_loop, T)), rel_tol)


def check_equilibrium_ou(sys, R, seed, T=1.0, h=2.0**-12, rel_tol=0.07, threads=1):
    """Nonlinear fluctuation limit started at an equilibrium, where it is an OU process.

    The linearization is constant along the rest point, so the variance of
    ``Z(T)`` has the closed form ``∫ e^{Js} S S^T e^{J^T s} ds``.
    """
    y0 = sys.y0
    rest = np.asarray(sys.drift(y0, y0), dtype=float)
    if np.max(np.abs(rest)) > 1e-12:
        raise InvariantError(f"y0 is not an equilibrium of {sys.name!r}")
    J = np.asarray(sys.jac_x(y0, y0)) + np.asarray(sys.jac_z(y0, y0))
    S = np.asarray(sys.diffusion(y0))
    target = np.trace(gramian(J, T, S @ S.T))
    mesh = make_mesh(T, h)

    def terminal(reps):
        paths = [brownian_path(mesh, sys.dim, seed, r, 1) for r in reps]
        st = stack([mesh] * len(reps), paths)
        return nonlindyn.simulate_stack(sys, st, 1.0, 0.0, 1.0, 1.0, want=("Z",))["Z"][:, -1]

    plan = [range(s, min(s + 256, R)) for s in range(0, R, 256)]
    Z = np.concatenate(_map(terminal, plan, threads))
    return _variance_check(Z, target, rel_tol)
