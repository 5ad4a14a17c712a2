"""Time meshes and Brownian paths shared by the linear and nonlinear simulators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ParameterError
from .renewal import BROWNIAN_STREAM, stream_rng


@dataclass(frozen=True, eq=False)
class Mesh:
    """Strictly increasing times ``0 = t_0 < ... < t_L = T``.

    ``anchor[i]`` marks the sampling instants, where a held control is
    refreshed; ``t_0`` is always one.
    """

    points: np.ndarray
    anchor: np.ndarray
    h: float

    @property
    def T(self):
        return float(self.points[-1])

    @property
    def steps(self):
        return np.diff(self.points)

    def __len__(self):
        return len(self.points)

    def refine(self, k=1):
        """Split every interval into ``2**k`` equal pieces, keeping the anchors."""
        m = 2**k
        frac = np.arange(m) / m
        pts = (self.points[:-1, None] + frac * self.steps[:, None]).reshape(-1)
        pts = np.append(pts, self.points[-1])
        anchor = np.zeros(len(pts), dtype=bool)
        anchor[::m] = self.anchor
        return Mesh(points=_frozen(pts), anchor=_frozen(anchor), h=self.h / m)

    def check_grid(self, grid):
        """Raise unless the anchors are exactly the sampling points of ``grid``."""
        if abs(self.T - grid.T) > 1e-12 * max(1.0, grid.T):
            raise ContractError(f"mesh horizon {self.T} differs from grid horizon {grid.T}")
        if not np.array_equal(self.points[self.anchor], grid.times):
            raise ContractError("mesh anchors do not match the sampling grid")


def _frozen(a):
    a.setflags(write=False)
    return a


def make_mesh(T, h, grid=None):
    """Uniform mesh of pitch at most ``h`` merged with the points of ``grid``."""
    T, h = float(T), float(h)
    if not T > 0 or not h > 0:
        raise ParameterError(f"mesh needs T > 0 and h > 0, got T={T!r}, h={h!r}")
    m = max(1, math.ceil(T / h - 1e-9))
    pts = np.linspace(0.0, T, m + 1)
    if grid is None:
        anchor = np.zeros(len(pts), dtype=bool)
        anchor[0] = True
        return Mesh(points=_frozen(pts), anchor=_frozen(anchor), h=h)
    if abs(grid.T - T) > 1e-12 * max(1.0, T):
        raise ContractError(f"grid horizon {grid.T} differs from mesh horizon {T}")
    pts = np.union1d(pts, grid.times)
    anchor = np.zeros(len(pts), dtype=bool)
    anchor[np.searchsorted(pts, grid.times)] = True
    return Mesh(points=_frozen(pts), anchor=_frozen(anchor), h=h)


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """A ``d``-dimensional Brownian path sampled on a mesh.

    ``increments[i]`` is ``W(t_{i+1}) - W(t_i)``; ``sub_increments[i]`` splits
    it into ``substeps`` equal sub-intervals by Brownian-bridge refinement.
    """

    mesh: Mesh
    increments: np.ndarray
    sub_increments: np.ndarray

    @property
    def dim(self):
        return self.increments.shape[-1]

    @property
    def substeps(self):
        return self.sub_increments.shape[1]

    def values(self):
        out = np.zeros((len(self.mesh), self.dim))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out

    def check_mesh(self, mesh):
        if mesh is not self.mesh and not np.array_equal(mesh.points, self.mesh.points):
            raise ContractError("Brownian path was sampled on a different mesh")


def bridge_refine(dt, increments, levels, rng):
    """Bisect each increment ``levels`` times; returns shape ``(L, 2**levels, d)``."""
    sub = increments[:, None, :]
    length = np.asarray(dt, dtype=float)[:, None, None]
    for _ in range(levels):
        xi = rng.standard_normal(sub.shape)
        left = 0.5 * sub + 0.5 * np.sqrt(length) * xi
        sub = np.stack([left, sub - left], axis=2).reshape(sub.shape[0], -1, sub.shape[2])
        length = 0.5 * length
    return sub


def brownian_path(mesh, d, seed, replication=0, substeps=8, salt=0):
    """Brownian path on ``mesh``, reproducible from ``(seed, replication, salt)``.

    Mesh increments are drawn first and then refined, so they do not depend
    on ``substeps``.
    """
    levels = _levels(substeps)
    rng = stream_rng(seed, replication, BROWNIAN_STREAM, salt)
    dt = mesh.steps
    inc = rng.standard_normal((len(dt), d)) * np.sqrt(dt)[:, None]
    sub = bridge_refine(dt, inc, levels, rng)
    return BrownianPath(mesh=mesh, increments=_frozen(inc), sub_increments=_frozen(sub))


def zero_path(mesh, d, substeps=8):
    """The path ``W = 0``, for deterministic runs of the stochastic integrators."""
    L = len(mesh) - 1
    return BrownianPath(
        mesh=mesh,
        increments=_frozen(np.zeros((L, d))),
        sub_increments=_frozen(np.zeros((L, substeps, d))),
    )


def _levels(substeps):
    levels = int(round(math.log2(substeps)))
    if substeps < 1 or 2**levels != substeps:
        raise ParameterError(f"substeps must be a power of two, got {substeps!r}")
    return levels


@dataclass(frozen=True)
class Stack:
    """Meshes (and optionally Brownian paths) padded to a common length.

    Padding steps have zero length and zero noise, so every integrator treats
    them as no-ops and sup-norms over the padded arrays are unchanged.
    """

    times: np.ndarray  # (R, L+1)
    dt: np.ndarray  # (R, L)
    anchor: np.ndarray  # (R, L), anchor at the left end of each step
    lengths: np.ndarray  # (R,), true number of steps
    dW: np.ndarray | None = None  # (R, L, d)
    sub_dW: np.ndarray | None = None  # (R, L, m, d)

    @property
    def size(self):
        return self.dt.shape[0]


def stack(meshes, paths=None):
    R = len(meshes)
    lengths = np.array([len(m) - 1 for m in meshes])
    L = int(lengths.max())
    times = np.empty((R, L + 1))
    anchor = np.zeros((R, L), dtype=bool)
    for r, m in enumerate(meshes):
        k = lengths[r]
        times[r, : k + 1] = m.points
        times[r, k + 1 :] = m.points[-1]
        anchor[r, :k] = m.anchor[:-1]
    dt = np.diff(times, axis=1)
    dW = sub = None
    if paths is not None:
        d, s = paths[0].dim, paths[0].substeps
        dW = np.zeros((R, L, d))
        sub = np.zeros((R, L, s, d))
        for r, (m, w) in enumerate(zip(meshes, paths)):
            w.check_mesh(m)
            dW[r, : lengths[r]] = w.increments
            sub[r, : lengths[r]] = w.sub_increments
    return Stack(times=times, dt=dt, anchor=anchor, lengths=lengths, dW=dW, sub_dW=sub)
