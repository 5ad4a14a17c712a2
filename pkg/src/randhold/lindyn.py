"""Coupled linear trajectories on a shared mesh.

Every linear evolution is stepped with its exact propagator, so the only
approximation left is the quadrature that turns the Brownian sub-increments
into the stochastic convolution of one mesh step.  The same sub-increments
drive the noisy state and the fluctuation limit, which is what makes the
pathwise comparison between them meaningful.

The kernels work on a :class:`~randhold.paths.Stack` of replications; the
public single-path functions wrap them with a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError, NumericalError, ParameterError
from .linalg import block_exp, closed_loop_flow, hold_integral, mat_exp
from .paths import stack


def _apply(M, v):
    """Batched matrix-vector product ``M @ v`` over leading axes."""
    if M.shape[-1] == 1:
        return M[..., 0] * v
    return np.einsum("...ij,...j->...i", M, v)


def _convolution_steps(op, dt, sub_dW):
    """Per-step ``∫ exp(op (t_{i+1} - s)) dW_s`` by the exponential midpoint rule on the sub-increments."""
    m = sub_dW.shape[-2]
    delta = dt / m
    E_full = mat_exp(op, delta)
    E_half = mat_exp(op, 0.5 * delta)
    g = np.zeros(dt.shape + (op.shape[0],))
    for j in range(m):
        g = _apply(E_full, g) + _apply(E_half, sub_dW[..., j, :])
    return g


def _ideal(sys, times):
    return _apply(closed_loop_flow(sys, times), sys.x0)


def _held(sys, st, eps):
    R, L = st.dt.shape
    d = sys.dim
    EA = mat_exp(sys.A, st.dt)
    FA = hold_integral(sys, st.dt)
    noise = None
    if eps != 0:
        noise = eps * _convolution_steps(sys.A, st.dt, st.sub_dW)
    X = np.empty((R, L + 1, d))
    X[:, 0] = sys.x0
    held = X[:, 0].copy()
    for i in range(L):
        held = np.where(st.anchor[:, i, None], X[:, i], held)
        nxt = _apply(EA[:, i], X[:, i]) - _apply(FA[:, i], held)
        if noise is not None:
            nxt += noise[:, i]
        X[:, i + 1] = nxt
    return X


def _forced_ou(sys, st, x, coef, with_noise):
    """``dY = (A-BK) Y dt + coef * BK (A-BK) x dt (+ dW)``, ``Y(0) = 0``, stepped exactly."""
    R, L = st.dt.shape
    Lop = sys.closed_loop
    EL = mat_exp(Lop, st.dt)
    inc = np.zeros((R, L, sys.dim))
    if coef != 0:
        _, V, _ = block_exp(Lop, sys.BK @ Lop, Lop, st.dt)
        inc += coef * _apply(V, x[:, :-1])
    if with_noise:
        inc += _convolution_steps(Lop, st.dt, st.sub_dW)
    Y = np.empty((R, L + 1, sys.dim))
    Y[:, 0] = 0.0
    for i in range(L):
        Y[:, i + 1] = _apply(EL[:, i], Y[:, i]) + inc[:, i]
    return Y


def simulate_stack(sys, st, eps, regime_c=0.0, M=None, forcing_sign=1.0, want=("x", "X", "Z", "Q")):
    """Run the requested linear trajectories on every replication of a stack.

    Returns a dict of arrays of shape ``(R, L+1, d)``.  ``X`` uses noise level
    ``eps`` (``eps = 0`` gives the noiseless held trajectory).  ``Z`` and ``Q``
    need the mean age ``M``.
    """
    out = {}
    x = _ideal(sys, st.times)
    if "x" in want:
        out["x"] = x
    if "X" in want:
        out["X"] = _held(sys, st, eps)
    if "Z" in want:
        out["Z"] = _forced_ou(sys, st, x, -forcing_sign * regime_c * M, with_noise=True)
    if "Q" in want:
        out["Q"] = _forced_ou(sys, st, x, -forcing_sign * M, with_noise=False)
    return out


def _single(sys, mesh, W=None):
    return stack([mesh], None if W is None else [W])


def _finite(traj, mesh):
    bad = ~np.all(np.isfinite(traj), axis=-1)
    if bad.any():
        raise NumericalError("non-finite state", time=float(mesh.points[np.argmax(bad)]))
    return traj


def ideal_trajectory(sys, mesh):
    """``x(t) = exp(t (A - BK)) x0`` at every mesh point."""
    return _finite(_ideal(sys, mesh.points), mesh)


def sampled_trajectory(sys, grid, mesh):
    """Sample-and-hold trajectory: the control ``-K x`` is refreshed only at grid points."""
    mesh.check_grid(grid)
    st = _single(sys, mesh)
    return _finite(_held(sys, st, 0.0)[0], mesh)


def noisy_trajectory(sys, grid, mesh, W, epsilon):
    """Sample-and-hold trajectory perturbed by ``epsilon dW``.

    ``epsilon = 0`` reproduces :func:`sampled_trajectory` bit for bit.
    """
    epsilon = float(epsilon)
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    mesh.check_grid(grid)
    W.check_mesh(mesh)
    if W.dim != sys.dim:
        raise ContractError(f"Brownian dimension {W.dim} differs from state dimension {sys.dim}")
    return _finite(_held(sys, _single(sys, mesh, W), epsilon)[0], mesh)


def z_limit_trajectory(sys, mesh, W, regime_c, M, forcing_sign=1.0):
    """Fluctuation limit ``dZ = (A-BK) Z dt - c M BK (A-BK) x dt + dW``, ``Z(0) = 0``.

    ``forcing_sign=-1`` flips the sign of the sampling forcing term.
    """
    if regime_c < 0:
        raise DomainError("regime constant must be non-negative")
    if not M > 0:
        raise ParameterError("M must be positive")
    W.check_mesh(mesh)
    st = _single(sys, mesh, W)
    x = _ideal(sys, st.times)
    return _finite(_forced_ou(sys, st, x, -forcing_sign * regime_c * M, True)[0], mesh)


def q_limit_trajectory(sys, mesh, M, forcing_sign=1.0):
    """Deterministic limit ``dQ = (A-BK) Q dt - M BK (A-BK) x dt``, ``Q(0) = 0``."""
    if not M > 0:
        raise ParameterError("M must be positive")
    st = _single(sys, mesh)
    x = _ideal(sys, st.times)
    return _finite(_forced_ou(sys, st, x, -forcing_sign * M, False)[0], mesh)


def ell(sys, mesh, regime_c, M):
    """Effective drift ``c M ∫_0^t (A-BK) x(s) ds = c M (x(t) - x0)``."""
    return regime_c * M * (ideal_trajectory(sys, mesh) - sys.x0)


@dataclass(frozen=True, eq=False)
class CoupledPaths:
    """Trajectories of one replication driven by a single Brownian path."""

    mesh: object
    x: np.ndarray
    xn: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    Q: np.ndarray
    epsilon: float
    n: int
    regime_c: float


def coupled_paths(sys, grid, mesh, W, epsilon, regime_c, M, forcing_sign=1.0):
    """All five trajectories of one replication on ``mesh``."""
    return CoupledPaths(
        mesh=mesh,
        x=ideal_trajectory(sys, mesh),
        xn=sampled_trajectory(sys, grid, mesh),
        X=noisy_trajectory(sys, grid, mesh, W, epsilon),
        Z=z_limit_trajectory(sys, mesh, W, regime_c if np.isfinite(regime_c) else 0.0, M, forcing_sign),
        Q=q_limit_trajectory(sys, mesh, M, forcing_sign),
        epsilon=float(epsilon),
        n=grid.n,
        regime_c=float(regime_c),
    )


def sup_errors(x, X, Z, Q, epsilon, n, ps=(1.0,)):
    """Sup-norm error statistics over the last-but-one axis; works on single paths or stacks."""
    dev = X - x
    absdev = np.linalg.norm(dev, axis=-1)
    out = {f"lln_{p:g}": np.max(absdev**p, axis=-1) for p in ps}
    if Z is not None:
        out["clt"] = np.max(np.linalg.norm(dev - epsilon * Z, axis=-1), axis=-1)
    if Q is not None:
        out["regime3"] = np.max(np.linalg.norm(dev - Q / n, axis=-1), axis=-1)
    return out


def fluctuation_errors(paths, ps=(1.0,)):
    """``sup|X-x|^p`` for each ``p``, ``sup|X-x-eps Z|`` and ``sup|X-x-Q/n|`` over the mesh."""
    shapes = {a.shape for a in (paths.x, paths.xn, paths.X, paths.Z, paths.Q)}
    if len(shapes) != 1 or paths.x.shape[0] != len(paths.mesh):
        raise ContractError("trajectories are not on a common mesh")
    errs = sup_errors(paths.x, paths.X, paths.Z, paths.Q, paths.epsilon, paths.n, ps)
    return {
        "lln_sup_p": {p: float(errs[f"lln_{p:g}"]) for p in ps},
        "clt_sup": float(errs["clt"]),
        "regime3_sup": float(errs["regime3"]),
    }
