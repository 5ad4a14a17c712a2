"""Dense matrix kernel: exponentials, hold propagators and closed-loop flows.

All routines accept a scalar time or an array of times and broadcast the
result over a leading batch axis, so a whole mesh of step lengths can be
propagated with one call.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, InvariantError

# Higham (2005) degree thresholds for the 1-norm of the scaled argument.
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0,
    ),
    13: (
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
        16380.0, 182.0, 1.0,
    ),
}


def _pade(X, m):
    """Diagonal Padé approximant of degree ``m`` for a stack ``X`` (k, d, d)."""
    b = _PADE[m]
    eye = np.broadcast_to(np.eye(X.shape[-1]), X.shape)
    X2 = X @ X
    if m == 13:
        X4 = X2 @ X2
        X6 = X4 @ X2
        U = X6 @ (b[13] * X6 + b[11] * X4 + b[9] * X2)
        U = X @ (U + b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * eye)
        V = X6 @ (b[12] * X6 + b[10] * X4 + b[8] * X2)
        V = V + b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * eye
    else:
        powers = [eye, X2]
        for _ in range(2, m // 2 + 1):
            powers.append(powers[-1] @ X2)
        U = sum(b[2 * j + 1] * powers[j] for j in range(m // 2 + 1))
        U = X @ U
        V = sum(b[2 * j] * powers[j] for j in range(m // 2 + 1))
    return np.linalg.solve(V - U, V + U)


def expm(X):
    """Matrix exponential of a square matrix or a stack of them.

    Scaling and squaring with a diagonal Padé core; degree and scaling are
    chosen per matrix from its 1-norm.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim < 2 or X.shape[-1] != X.shape[-2]:
        raise DimensionError(f"expm needs square matrices, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DomainError("expm argument has non-finite entries")
    shape = X.shape
    d = shape[-1]
    flat = X.reshape(-1, d, d)
    if d == 1:
        return np.exp(flat).reshape(shape)
    norms = np.abs(flat).sum(axis=-2).max(axis=-1)
    degree = np.full(norms.shape, 13)
    for m in (9, 7, 5, 3):
        degree[norms <= _THETA[m]] = m
    squarings = np.zeros(norms.shape, dtype=int)
    big = degree == 13
    if big.any():
        squarings[big] = np.maximum(
            0, np.ceil(np.log2(np.maximum(norms[big], 1e-300) / _THETA[13]))
        ).astype(int)
    out = np.empty_like(flat)
    for m, s in sorted(set(zip(degree.tolist(), squarings.tolist()))):
        idx = np.nonzero((degree == m) & (squarings == s))[0]
        R = _pade(flat[idx] / 2.0**s, m)
        for _ in range(s):
            R = R @ R
        out[idx] = R
    return out.reshape(shape)


def mat_exp(M, t=1.0):
    """Return ``exp(t M)``; an array of ``t`` gives a stack of exponentials."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"mat_exp needs a square matrix, got shape {M.shape}")
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("mat_exp time must be finite")
    return expm(t[..., None, None] * M)


def block_exp(P, Q, R, t):
    """Exponential of the block matrix ``[[P, Q], [0, R]] t``; returns (top-left, top-right, bottom-right)."""
    P, Q, R = (np.asarray(a, dtype=float) for a in (P, Q, R))
    p, r = P.shape[0], R.shape[0]
    big = np.zeros((p + r, p + r))
    big[:p, :p] = P
    big[:p, p:] = Q
    big[p:, p:] = R
    E = mat_exp(big, t)
    return E[..., :p, :p], E[..., :p, p:], E[..., p:, p:]


def gramian(M, r, Q=None):
    """``∫_0^r exp(M s) Q exp(M^T s) ds`` (``Q = I`` by default) via Van Loan's block identity."""
    M = np.asarray(M, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("gramian needs r >= 0")
    d = M.shape[0]
    Q = np.eye(d) if Q is None else np.asarray(Q, dtype=float)
    _, F12, F22 = block_exp(-M, Q, M.T, r)
    V = np.swapaxes(F22, -1, -2) @ F12
    return 0.5 * (V + np.swapaxes(V, -1, -2))


def _as_matrix(a, name):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if not np.all(np.isfinite(a)):
        raise InvariantError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """State matrix ``A``, input matrix ``B``, gain ``K`` and initial state ``x0``.

    ``A`` must be invertible and commute with ``BK``; either check can be
    switched off for experiments that deliberately leave that setting.
    """

    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    x0: np.ndarray
    check_invertible: bool = True
    check_commutation: bool = True
    det_tol: float = 1e-12
    commute_tol: float = 1e-10
    BK: np.ndarray = field(init=False, repr=False)
    closed_loop: np.ndarray = field(init=False, repr=False)
    A_inv: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        K = _as_matrix(self.K, "K")
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        d = A.shape[0]
        if A.shape != (d, d):
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != d or K.shape != (B.shape[1], d) or x0.shape != (d,):
            raise DimensionError(
                f"inconsistent shapes A{A.shape} B{B.shape} K{K.shape} x0{x0.shape}"
            )
        BK = B @ K
        A_inv = None
        if self.check_invertible:
            scale = max(1.0, np.linalg.norm(A)) ** d
            if abs(np.linalg.det(A)) <= self.det_tol * scale:
                raise InvariantError("A is singular")
            A_inv = np.linalg.inv(A)
            cond = np.linalg.cond(A)
            if cond > 1e8:
                warnings.warn(f"A is ill-conditioned (cond={cond:.3g})", RuntimeWarning)
        if self.check_commutation:
            gap = np.linalg.norm(A @ BK - BK @ A)
            tol = self.commute_tol * max(np.linalg.norm(A) * np.linalg.norm(BK), 1e-300)
            if gap > tol and gap > 0:
                raise InvariantError(f"A and BK do not commute (||[A,BK]||_F={gap:.3g})")
        for name, value in (("A", A), ("B", B), ("K", K), ("x0", x0), ("BK", BK),
                            ("closed_loop", A - BK), ("A_inv", A_inv)):
            if value is not None:
                value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def dim(self):
        return self.A.shape[0]


def hold_integral(sys, r):
    """``∫_0^r exp(A (r-s)) BK ds = (exp(rA) - I) A^{-1} BK``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("hold interval length must be non-negative")
    if sys.A_inv is None:
        raise InvariantError("hold propagator needs an invertible A")
    E = mat_exp(sys.A, r)
    return (E - np.eye(sys.dim)) @ (sys.A_inv @ sys.BK)


def hold_propagator(sys, r):
    """Flow of ``x' = A x - BK x(anchor)`` over a hold of length ``r``, applied to the anchor."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("hold interval length must be non-negative")
    return mat_exp(sys.A, r) - hold_integral(sys, r)


def closed_loop_flow(sys, t):
    """``exp(t (A - BK))``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("closed-loop flow needs t >= 0")
    return mat_exp(sys.closed_loop, t)


def noise_covariance(sys, r):
    """Covariance of ``∫_0^r exp(A (r-s)) dW_s`` for a standard Brownian motion."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("noise covariance needs r >= 0")
    return gramian(sys.A, r)


def gronwall_bound(sys, T):
    """Growth envelope ``|x0| exp((|A| + |B||K|) T)`` for the ideal and held trajectories."""
    nA = np.linalg.norm(sys.A, 2)
    nB = np.linalg.norm(sys.B, 2)
    nK = np.linalg.norm(sys.K, 2)
    return float(np.linalg.norm(sys.x0) * np.exp((nA + nB * nK) * T))


def random_commuting_system(rng, d, *, spectral_shift=1.0, scale=1.0):
    """Random system whose ``BK`` is a polynomial in ``A``, so the pair commutes exactly.

    ``B`` is the identity and ``K = p(A)``; the polynomial is chosen so that
    the closed loop ``A - BK`` is stable.
    """
    A = scale * rng.standard_normal((d, d)) / np.sqrt(d)
    A = A + spectral_shift * np.eye(d)
    while abs(np.linalg.det(A)) < 1e-3:
        A = A + 0.5 * np.eye(d)
    c0, c1 = rng.uniform(0.5, 1.5), rng.uniform(-0.3, 0.3)
    abscissa = np.max(np.linalg.eigvals(A).real)
    # shift c0 so every eigenvalue of (1 - c1) A - c0 I has negative real part
    lo = np.min(np.linalg.eigvals(A).real)
    worst = max((1 - c1) * abscissa, (1 - c1) * lo)
    K = (c0 + max(worst, 0.0)) * np.eye(d) + c1 * A
    x0 = rng.standard_normal(d)
    x0 /= np.linalg.norm(x0)
    return LinearSystem(A=A, B=np.eye(d), K=K, x0=x0)
