"""
Created on 2026-10-18

Functions f whose expectation pi(f) is estimated.

@author: wf
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from langevincv.errors import ParameterError
from langevincv.potentials import Potential


@dataclass(frozen=True)
class Observable:
    """
    a function f with optional analytic gradient and Laplacian,
    all mapping points of shape (..., dim)

    Attributes:
        name: identifier used in result tables
        dim: dimension of the state space
        f: values (...)
        grad: gradients (..., dim)
        laplacian: Laplacians (...)
    """

    name: str
    dim: int
    f: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    laplacian: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.f(np.asarray(x, dtype=float))

    def generator(self, p: Potential, x: np.ndarray) -> np.ndarray:
        """
        L f(x) = -<grad U(x), grad f(x)> + Laplacian f(x)
        """
        if self.grad is None or self.laplacian is None:
            raise ParameterError(f"{self.name} has no analytic derivatives")
        x = np.asarray(x, dtype=float)
        lf = -np.sum(p.grad_u(x) * self.grad(x), axis=-1) + self.laplacian(x)
        return lf


def mixture_observable() -> Observable:
    """
    f(x) = x + x^3/2 + 3 sin(x) on the real line
    """

    def f(x):
        t = x[..., 0]
        return t + 0.5 * t**3 + 3.0 * np.sin(t)

    def grad(x):
        t = x[..., 0]
        return (1.0 + 1.5 * t * t + 3.0 * np.cos(t))[..., np.newaxis]

    def laplacian(x):
        t = x[..., 0]
        return 3.0 * t - 3.0 * np.sin(t)

    return Observable("x+x^3/2+3sin(x)", 1, f, grad, laplacian)


def coordinate(k: int, dim: int) -> Observable:
    """
    f(x) = x_k, k 1-based
    """
    if not 1 <= k <= dim:
        raise ParameterError(f"coordinate {k} out of range 1..{dim}")
    unit = np.eye(dim)[k - 1]

    def f(x):
        return x[..., k - 1].copy()

    def grad(x):
        return np.broadcast_to(unit, x.shape).copy()

    def laplacian(x):
        return np.zeros(x.shape[:-1])

    return Observable(f"x{k}", dim, f, grad, laplacian)


def coordinate_square(k: int, dim: int) -> Observable:
    """
    f(x) = x_k^2, k 1-based
    """
    if not 1 <= k <= dim:
        raise ParameterError(f"coordinate {k} out of range 1..{dim}")

    def f(x):
        return x[..., k - 1] ** 2

    def grad(x):
        g = np.zeros_like(x)
        g[..., k - 1] = 2.0 * x[..., k - 1]
        return g

    def laplacian(x):
        return np.full(x.shape[:-1], 2.0)

    return Observable(f"x{k}^2", dim, f, grad, laplacian)


def constant(c: float, dim: int) -> Observable:
    def f(x):
        return np.full(x.shape[:-1], float(c))

    def grad(x):
        return np.zeros_like(x)

    def laplacian(x):
        return np.zeros(x.shape[:-1])

    return Observable(f"{c:g}", dim, f, grad, laplacian)


def regression_observables(dim: int) -> List[Observable]:
    """
    f_k = x_k and f_{k+d} = x_k^2 for k = 1..d
    """
    observables = [coordinate(k, dim) for k in range(1, dim + 1)]
    observables += [coordinate_square(k, dim) for k in range(1, dim + 1)]
    return observables
