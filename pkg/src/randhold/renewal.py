"""Renewal sampling grids, their scaling, and renewal-theoretic constants.

Inter-arrival times ``xi_k`` are i.i.d. and positive.  At sampling rate ``n``
the grid is ``tau^n_k = (xi_1 + ... + xi_k) / n`` and ``N^n_T`` counts the
points in ``(0, T]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError

# Philox counter word reserved for each random stream of a replication.
GRID_STREAM = 0
BROWNIAN_STREAM = 1

_U64 = (1 << 64) - 1


def stream_rng(seed, replication, stream=GRID_STREAM, salt=0):
    """Counter-based generator keyed by ``(seed, replication)``.

    ``stream`` and ``salt`` occupy separate counter words, so draws for one
    replication never depend on how many other replications were generated
    or in which order.
    """
    key = np.array([int(seed) & _U64, int(replication) & _U64], dtype=np.uint64)
    counter = np.array([0, 0, int(salt) & _U64, int(stream) & _U64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


class InterarrivalDistribution:
    """Law of one inter-arrival time; concrete families subclass this."""

    kind = "abstract"

    def sample(self, rng, size):
        raise NotImplementedError

    def moment(self, k):
        """Raw moment ``E[xi^k]`` in closed form, ``k = 1..4``."""
        raise NotImplementedError

    @property
    def mean(self):
        return self.moment(1)

    @property
    def variance(self):
        return self.moment(2) - self.moment(1) ** 2

    def params(self):
        raise NotImplementedError

    def to_dict(self):
        return {"kind": self.kind, **self.params()}


def _positive(name, value):
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be positive and finite, got {value!r}")
    return value


@dataclass(frozen=True)
class Deterministic(InterarrivalDistribution):
    a: float
    kind = "deterministic"

    def __post_init__(self):
        object.__setattr__(self, "a", _positive("a", self.a))

    def sample(self, rng, size):
        return np.full(size, self.a)

    def moment(self, k):
        return self.a**k

    def params(self):
        return {"a": self.a}


@dataclass(frozen=True)
class Uniform(InterarrivalDistribution):
    """Uniform on ``[a, b]``; ``strict=True`` rejects ``a = 0``."""

    a: float
    b: float
    strict: bool = False
    kind = "uniform"

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b <= a:
            raise ParameterError(f"uniform needs 0 <= a < b, got a={a!r}, b={b!r}")
        if self.strict and a == 0:
            raise ParameterError("uniform with strict positivity needs a > 0")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def sample(self, rng, size):
        xi = rng.uniform(self.a, self.b, size)
        # uniform(0, b) can return exactly 0; redraw keeps support in (0, b]
        zero = xi <= 0
        while zero.any():
            xi[zero] = rng.uniform(self.a, self.b, int(zero.sum()))
            zero = xi <= 0
        return xi

    def moment(self, k):
        a, b = self.a, self.b
        return (b ** (k + 1) - a ** (k + 1)) / ((k + 1) * (b - a))

    def params(self):
        out = {"a": self.a, "b": self.b}
        if self.strict:
            out["strict"] = True
        return out


@dataclass(frozen=True)
class Exponential(InterarrivalDistribution):
    rate: float
    kind = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    def moment(self, k):
        return math.factorial(k) / self.rate**k

    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class Gamma(InterarrivalDistribution):
    shape: float
    scale: float
    kind = "gamma"

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "scale", _positive("scale", self.scale))

    def sample(self, rng, size):
        return rng.gamma(self.shape, self.scale, size)

    def moment(self, k):
        out = self.scale**k
        for j in range(k):
            out *= self.shape + j
        return out

    def params(self):
        return {"shape": self.shape, "scale": self.scale}


_KINDS = {cls.kind: cls for cls in (Deterministic, Uniform, Exponential, Gamma)}


def distribution_from_dict(spec):
    """Inverse of :meth:`InterarrivalDistribution.to_dict`."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _KINDS:
        raise ParameterError(f"unknown inter-arrival kind {kind!r}; expected one of {sorted(_KINDS)}")
    try:
        return _KINDS[kind](**spec)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {kind}: {exc}") from None


@dataclass(frozen=True)
class RenewalConstants:
    mean: float
    second_moment: float
    variance: float
    M: float


def constants_of(dist):
    """Mean, second moment, variance and the mean age ``M = E[xi^2] / (2 E[xi])``."""
    m1, m2 = dist.moment(1), dist.moment(2)
    return RenewalConstants(mean=m1, second_moment=m2, variance=m2 - m1 * m1, M=m2 / (2.0 * m1))


@dataclass(frozen=True, eq=False)
class SamplingGrid:
    """Realized sampling times on ``[0, T]``.

    ``times[0] = 0`` and ``times[1:]`` are the ``count`` renewal points in
    ``(0, T]``; ``overshoot`` is the first point beyond ``T``.  ``xi`` holds the
    unscaled inter-arrival draws ``xi_1 .. xi_{count+1}``.
    """

    n: int
    T: float
    times: np.ndarray
    overshoot: float
    xi: np.ndarray = field(repr=False)

    @property
    def count(self):
        return len(self.times) - 1

    def gaps(self):
        """Lengths of the hold intervals covering ``[0, T]``; the last one is truncated at ``T``."""
        return np.diff(np.append(self.times, self.T))


def _validate_n_T(n, T):
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    T = float(T)
    if not math.isfinite(T) or T < 0:
        raise ParameterError(f"T must be non-negative and finite, got {T!r}")
    return int(n), T


def draw_until(dist, rng, level):
    """Draw ``xi_1, xi_2, ...`` until the partial sum first exceeds ``level``.

    Returns the draws and their cumulative sums, both ending at the first
    crossing.  Chunk sizes depend only on ``level`` and the law, so the
    consumed stream is a function of ``(dist, level, rng state)``.
    """
    mu, var = dist.mean, dist.variance
    first = int(level / mu + 5.0 * math.sqrt(level * var / mu**3 + 1.0) + 16)
    xi = dist.sample(rng, first)
    sums = np.cumsum(xi)
    while sums[-1] <= level:
        xi = np.concatenate([xi, dist.sample(rng, max(16, first // 4))])
        sums = np.cumsum(xi)
    k = int(np.searchsorted(sums, level, side="right"))
    return xi[: k + 1], sums[: k + 1]


def sample_grid(dist, n, T, seed, replication=0):
    """Renewal grid at rate ``n`` on ``[0, T]`` for the given seed and replication.

    Counting compares raw partial sums with ``n T``, so a grid at ``(n, T)``
    and one at ``(1, n T)`` with the same seed have identical counts.
    """
    n, T = _validate_n_T(n, T)
    if not isinstance(dist, InterarrivalDistribution):
        raise ParameterError(f"expected an inter-arrival distribution, got {dist!r}")
    rng = stream_rng(seed, replication, GRID_STREAM)
    xi, sums = draw_until(dist, rng, n * T)
    count = len(sums) - 1
    times = np.empty(count + 1)
    times[0] = 0.0
    np.minimum(sums[:count] / n, T, out=times[1:])
    times.setflags(write=False)
    xi.setflags(write=False)
    return SamplingGrid(n=n, T=T, times=times, overshoot=float(sums[count] / n), xi=xi)


def grid_from_times(times, T, n=1):
    """Grid with prescribed points, mainly for tests and hand-built examples."""
    n, T = _validate_n_T(n, T)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0 or times[0] != 0.0:
        raise ParameterError("grid times must start at 0")
    if np.any(np.diff(times) <= 0) or times[-1] > T:
        raise ParameterError("grid times must increase strictly and stay within [0, T]")
    xi = np.diff(times) * n
    overshoot = math.inf
    times = times.copy()
    times.setflags(write=False)
    return SamplingGrid(n=n, T=T, times=times, overshoot=overshoot, xi=xi)


def pi_of(grid, t):
    """Last sampling time ``<= t``; ``t`` may be a scalar or an array."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > grid.T) or not np.all(np.isfinite(t_arr)):
        raise DomainError(f"t must lie in [0, {grid.T}]")
    idx = np.searchsorted(grid.times, t_arr, side="right") - 1
    out = grid.times[idx]
    return float(out) if np.ndim(t) == 0 else out


def mean_age_integral(grid, p=1.0):
    """Exact ``∫_0^T (s - pi(s))^p ds``: each hold interval contributes ``gap^(p+1)/(p+1)``."""
    p = float(p)
    if not p > 0:
        raise ParameterError(f"p must be positive, got {p!r}")
    gaps = grid.gaps()
    return float(np.sum(gaps ** (p + 1)) / (p + 1))
