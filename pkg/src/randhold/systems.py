"""Named linear test systems."""

import numpy as np

from .errors import ParameterError
from .linalg import LinearSystem

_A2 = np.array([[1.0, 0.5], [-0.5, 1.0]])

_LINEAR = {
    # scalar unstable plant stabilised by K = 2: closed loop x' = -x
    "S1": lambda: LinearSystem(A=[[1.0]], B=[[1.0]], K=[[2.0]], x0=[1.0]),
    # rotation-type plant with BK = 2I + A/2, a polynomial in A
    "S2": lambda: LinearSystem(A=_A2, B=np.eye(2), K=2.0 * np.eye(2) + 0.5 * _A2, x0=[1.0, 0.0]),
}


def linear_system(name):
    try:
        return _LINEAR[name]()
    except KeyError:
        raise ParameterError(f"unknown linear system {name!r}; known: {sorted(_LINEAR)}") from None


def linear_systems():
    return sorted(_LINEAR)
