"""Nonlinear sample-and-hold dynamics with multiplicative small noise.

The closed loop is ``y' = c(y, y)``; sampling freezes the second argument at
the last sampling instant, and the perturbed system adds
``eps * sigma(Y) dW``.  Deterministic trajectories use classical RK4 and the
stochastic ones Euler-Maruyama on the mesh.

User evaluators must be vectorized over leading axes: ``drift(x, z)`` maps
``(..., d)`` arrays to ``(..., d)``; ``diffusion(x)``, ``jac_x(x, z)`` and
``jac_z(x, z)`` return ``(..., d, d)``.  They are called from several worker
threads at once and must not keep mutable state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractError, DomainError, InvariantError, NumericalError, ParameterError
from .paths import stack


@dataclass(frozen=True, eq=False)
class NonlinearSystem:
    dim: int
    drift: Callable
    diffusion: Callable
    jac_x: Callable
    jac_z: Callable
    y0: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        y0 = np.asarray(self.y0, dtype=float).reshape(-1)
        if y0.shape != (self.dim,):
            raise ParameterError(f"y0 must have length {self.dim}")
        y0.setflags(write=False)
        object.__setattr__(self, "y0", y0)

    def with_y0(self, y0):
        return NonlinearSystem(self.dim, self.drift, self.diffusion, self.jac_x, self.jac_z, y0, self.name)


def check_jacobians(sys, probes=64, seed=0, box=2.0, step=1e-5, rtol=1e-6):
    """Compare the supplied Jacobians with central differences at random probes.

    Raises :class:`InvariantError` on disagreement; returns the worst
    relative discrepancy otherwise.
    """
    rng = np.random.default_rng(seed)
    d = sys.dim
    x = rng.uniform(-box, box, (probes, d))
    z = rng.uniform(-box, box, (probes, d))
    worst = 0.0
    for which, jac in ((0, sys.jac_x), (1, sys.jac_z)):
        J = np.asarray(jac(x, z), dtype=float)
        fd = np.empty((probes, d, d))
        for k in range(d):
            e = np.zeros(d)
            e[k] = step
            if which == 0:
                plus, minus = sys.drift(x + e, z), sys.drift(x - e, z)
            else:
                plus, minus = sys.drift(x, z + e), sys.drift(x, z - e)
            fd[:, :, k] = (np.asarray(plus) - np.asarray(minus)) / (2 * step)
        err = np.abs(J - fd) / np.maximum(1.0, np.abs(J))
        worst = max(worst, float(err.max()))
    if worst > rtol:
        raise InvariantError(f"Jacobians of {sys.name!r} disagree with finite differences ({worst:.2e})")
    return worst


def estimate_lipschitz(sys, pairs=1000, seed=0, box=2.0):
    """Largest observed ratio ``|c(x1,x2)-c(z1,z2)| / (|x1-z1| + |x2-z2|)`` over random pairs."""
    rng = np.random.default_rng(seed)
    d = sys.dim
    x1, x2, z1, z2 = (rng.uniform(-box, box, (pairs, d)) for _ in range(4))
    num = np.linalg.norm(np.asarray(sys.drift(x1, x2)) - np.asarray(sys.drift(z1, z2)), axis=-1)
    den = np.linalg.norm(x1 - z1, axis=-1) + np.linalg.norm(x2 - z2, axis=-1)
    return float(np.max(num / den))


_REGISTRY: dict[str, Callable[[], NonlinearSystem]] = {}


def register_system(name, factory, check=True):
    """Make ``factory()`` available by ``name``; Jacobians are verified on registration."""
    if check:
        sys = factory()
        check_jacobians(sys)
        lip = estimate_lipschitz(sys)
        if not np.isfinite(lip) or lip > 1e6:
            warnings.warn(f"system {name!r} looks non-Lipschitz (estimate {lip:.3g})", RuntimeWarning)
    _REGISTRY[name] = factory


def get_system(name):
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ParameterError(f"unknown nonlinear system {name!r}; known: {sorted(_REGISTRY)}") from None


def list_systems():
    return sorted(_REGISTRY)


def sine_feedback(y0=1.0):
    """``c(x, z) = -x - sin z`` with ``sigma(x) = 0.5 cos x``; ``y0 = 0`` is an equilibrium."""
    return NonlinearSystem(
        dim=1,
        drift=lambda x, z: -x - np.sin(z),
        diffusion=lambda x: 0.5 * np.cos(x)[..., None],
        jac_x=lambda x, z: -np.ones(np.shape(x) + (1,)),
        jac_z=lambda x, z: -np.cos(z)[..., None],
        y0=[y0],
        name="sine_feedback" if y0 != 0 else "equilibrium",
    )


def linear_embedding(lsys):
    """``c(x, z) = A x - BK z`` with identity diffusion."""
    A, BK = lsys.A, lsys.BK
    d = lsys.dim
    return NonlinearSystem(
        dim=d,
        drift=lambda x, z: x @ A.T - z @ BK.T,
        diffusion=lambda x: np.broadcast_to(np.eye(d), np.shape(x) + (d,)),
        jac_x=lambda x, z: np.broadcast_to(A, np.shape(x) + (d,)),
        jac_z=lambda x, z: np.broadcast_to(-BK, np.shape(x) + (d,)),
        y0=lsys.x0,
        name="linear_embedding",
    )


_ROT = np.array([[-0.5, 1.0], [-1.0, -0.5]])
_GAIN = np.array([[1.0, 0.3], [0.0, 0.8]])


def _rot_sat_diffusion(x):
    out = np.zeros(np.shape(x) + (2,))
    out[..., 0, 0] = 0.3
    out[..., 1, 1] = 0.2 + 0.1 * np.cos(x[..., 0])
    return out


def rotation_saturation(y0=(1.0, 0.0)):
    """Damped rotation with saturated feedback ``-tanh(G z)``; ``A`` and the gain do not commute."""
    def drift(x, z):
        return x @ _ROT.T - np.tanh(z @ _GAIN.T)

    def jac_z(x, z):
        s = 1.0 - np.tanh(z @ _GAIN.T) ** 2
        return -s[..., :, None] * _GAIN

    return NonlinearSystem(
        dim=2,
        drift=drift,
        diffusion=_rot_sat_diffusion,
        jac_x=lambda x, z: np.broadcast_to(_ROT, np.shape(x)[:-1] + (2, 2)),
        jac_z=jac_z,
        y0=y0,
        name="rotation_saturation",
    )


def _s1_embedding():
    from .systems import linear_system
    return linear_embedding(linear_system("S1"))


for _name, _factory in (
    ("equilibrium", lambda: sine_feedback(0.0)),
    ("sine_feedback", lambda: sine_feedback(1.0)),
    ("rotation_saturation", rotation_saturation),
    ("linear_embedding_s1", _s1_embedding),
):
    register_system(_name, _factory)


# --- integrators -----------------------------------------------------------

def _mv(M, v):
    return np.einsum("...ij,...j->...i", M, v)


def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _ideal(sys, st):
    R, L = st.dt.shape
    y = np.empty((R, L + 1, sys.dim))
    y[:, 0] = sys.y0
    f = lambda v: sys.drift(v, v)
    for i in range(L):
        y[:, i + 1] = _rk4_step(f, y[:, i], st.dt[:, i, None])
    return y


def _sampled(sys, st):
    R, L = st.dt.shape
    y = np.empty((R, L + 1, sys.dim))
    y[:, 0] = sys.y0
    held = y[:, 0].copy()
    for i in range(L):
        held = np.where(st.anchor[:, i, None], y[:, i], held)
        a = held
        y[:, i + 1] = _rk4_step(lambda v: sys.drift(v, a), y[:, i], st.dt[:, i, None])
    return y


def _euler_maruyama(sys, st, eps):
    R, L = st.dt.shape
    Y = np.empty((R, L + 1, sys.dim))
    Y[:, 0] = sys.y0
    held = Y[:, 0].copy()
    for i in range(L):
        cur = Y[:, i]
        held = np.where(st.anchor[:, i, None], cur, held)
        nxt = cur + sys.drift(cur, held) * st.dt[:, i, None]
        if eps != 0:
            nxt = nxt + eps * _mv(sys.diffusion(cur), st.dW[:, i])
        Y[:, i + 1] = nxt
    return Y


def _linearized(sys, st, y, coef, with_noise):
    """Euler-Maruyama for ``dZ = J(y) Z dt + coef * D2c(y,y) c(y,y) dt + sigma(y) dW`` along ``y``."""
    R, L = st.dt.shape
    yl = y[:, :-1]
    J = np.asarray(sys.jac_x(yl, yl)) + np.asarray(sys.jac_z(yl, yl))
    inc = np.zeros((R, L, sys.dim))
    if coef != 0:
        inc += coef * _mv(np.asarray(sys.jac_z(yl, yl)), sys.drift(yl, yl)) * st.dt[..., None]
    if with_noise:
        inc += _mv(np.asarray(sys.diffusion(yl)), st.dW)
    Z = np.empty((R, L + 1, sys.dim))
    Z[:, 0] = 0.0
    for i in range(L):
        Z[:, i + 1] = Z[:, i] + _mv(J[:, i], Z[:, i]) * st.dt[:, i, None] + inc[:, i]
    return Z


def simulate_stack(sys, st, eps, regime_c=0.0, M=None, forcing_sign=1.0, want=("y", "yn", "Y", "Z", "Q")):
    """Requested nonlinear trajectories for every replication of a stack, shape ``(R, L+1, d)``.

    ``y`` is the RK4 reference on each replication's own mesh.
    """
    out = {}
    y = _ideal(sys, st)
    if "y" in want:
        out["y"] = y
    if "yn" in want:
        out["yn"] = _sampled(sys, st)
    if "Y" in want:
        out["Y"] = _euler_maruyama(sys, st, eps)
    if "Z" in want:
        out["Z"] = _linearized(sys, st, y, forcing_sign * regime_c * M, True)
    if "Q" in want:
        out["Q"] = _linearized(sys, st, y, forcing_sign * M, False)
    return out


def _finite(traj, mesh):
    bad = ~np.all(np.isfinite(traj), axis=-1)
    if bad.any():
        raise NumericalError("non-finite state", time=float(mesh.points[np.argmax(bad)]))
    return traj


def ideal_nonlinear(sys, mesh):
    """RK4 solution of ``y' = c(y, y)`` on the mesh."""
    return _finite(_ideal(sys, stack([mesh]))[0], mesh)


def sampled_nonlinear(sys, grid, mesh):
    """RK4 solution of ``y' = c(y, y(pi(t)))`` with the anchor frozen between grid points."""
    mesh.check_grid(grid)
    return _finite(_sampled(sys, stack([mesh]))[0], mesh)


def noisy_nonlinear(sys, grid, mesh, W, epsilon):
    """Euler-Maruyama for ``dY = c(Y, Y(pi(t))) dt + eps sigma(Y) dW``."""
    epsilon = float(epsilon)
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    mesh.check_grid(grid)
    W.check_mesh(mesh)
    return _finite(_euler_maruyama(sys, stack([mesh], [W]), epsilon)[0], mesh)


def z_limit_nonlinear(sys, ideal, mesh, W, regime_c, M, forcing_sign=1.0):
    """Euler-Maruyama for the fluctuation limit along the precomputed ideal trajectory.

    ``dZ = [D1c + D2c](y,y) Z dt + c M D2c(y,y) c(y,y) dt + sigma(y) dW``.
    """
    if regime_c < 0:
        raise DomainError("regime constant must be non-negative")
    if not M > 0:
        raise ParameterError("M must be positive")
    W.check_mesh(mesh)
    ideal = np.asarray(ideal, dtype=float)
    if ideal.shape != (len(mesh), sys.dim):
        raise ContractError("ideal trajectory is not on the mesh")
    st = stack([mesh], [W])
    return _finite(_linearized(sys, st, ideal[None], forcing_sign * regime_c * M, True)[0], mesh)


def q_limit_nonlinear(sys, ideal, mesh, M, forcing_sign=1.0):
    """Deterministic regime-3 analogue: the fluctuation limit with no noise and unit regime constant."""
    if not M > 0:
        raise ParameterError("M must be positive")
    ideal = np.asarray(ideal, dtype=float)
    st = stack([mesh])
    return _finite(_linearized(sys, st, ideal[None], forcing_sign * M, False)[0], mesh)


def ell_g(sys, mesh, regime_c, M):
    """``c M ∫_0^t D2c(y,y) c(y,y) ds``, integrated jointly with ``y`` by RK4."""
    d = sys.dim

    def f(v):
        y = v[..., :d]
        cy = sys.drift(y, y)
        return np.concatenate([cy, regime_c * M * _mv(np.asarray(sys.jac_z(y, y)), cy)], axis=-1)

    v = np.zeros((len(mesh), 2 * d))
    v[0, :d] = sys.y0
    for i, h in enumerate(mesh.steps):
        v[i + 1] = _rk4_step(f, v[i], h)
    return v[:, d:]


@dataclass(frozen=True, eq=False)
class NonlinearPaths:
    mesh: object
    y: np.ndarray
    yn: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    epsilon: float
    n: int
    regime_c: float
    M: float


def nonlinear_paths(sys, grid, mesh, W, epsilon, regime_c, M, forcing_sign=1.0):
    y = ideal_nonlinear(sys, mesh)
    return NonlinearPaths(
        mesh=mesh,
        y=y,
        yn=sampled_nonlinear(sys, grid, mesh),
        Y=noisy_nonlinear(sys, grid, mesh, W, epsilon),
        Z=z_limit_nonlinear(sys, y, mesh, W, regime_c, M, forcing_sign),
        epsilon=float(epsilon),
        n=grid.n,
        regime_c=float(regime_c),
        M=float(M),
    )


def nonlinear_fluct_error(paths):
    """``sup |(Y - y)/eps - Z|`` over the mesh."""
    if paths.epsilon == 0:
        raise DomainError("fluctuation error needs epsilon > 0")
    if paths.Y.shape != paths.y.shape or paths.Z.shape != paths.y.shape:
        raise ContractError("trajectories are not on a common mesh")
    dev = (paths.Y - paths.y) / paths.epsilon - paths.Z
    return float(np.max(np.linalg.norm(dev, axis=-1)))


def sup_errors(y, Y, Z, Q, epsilon, n, ps=(1.0,)):
    """Nonlinear counterpart of the linear sup-norm statistics; works on single paths or stacks.

    The fluctuation error is on the rescaled scale, ``sup |(Y - y)/eps - Z|``.
    """
    dev = Y - y
    absdev = np.linalg.norm(dev, axis=-1)
    out = {f"lln_{p:g}": np.max(absdev**p, axis=-1) for p in ps}
    if Z is not None:
        out["clt"] = np.max(np.linalg.norm(dev / epsilon - Z, axis=-1), axis=-1)
    if Q is not None:
        out["regime3"] = np.max(np.linalg.norm(dev - Q / n, axis=-1), axis=-1)
    return out
