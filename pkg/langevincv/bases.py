"""
Created on 2026-10-18

Control function families psi = (psi_1, ..., psi_p) with analytic gradients
and Laplacians and the action of the Langevin generator
L g = -<grad U, grad g> + Laplacian g on the linear span g_theta = <theta, psi>.

@author: wf
"""

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np

from langevincv.errors import ParameterError, ShapeError
from langevincv.potentials import Potential

SQRT_2PI_INV = 1.0 / np.sqrt(2.0 * np.pi)


class BasisKind(Enum):
    """
    the available control function families
    """

    FIRST_ORDER = "first"
    SECOND_ORDER = "second"
    GAUSSIAN_KERNELS_1D = "gaussian_kernels"

    @classmethod
    def of_name(cls, name: str) -> "BasisKind":
        for kind in cls:
            if kind.value == name or kind.name.lower() == name.lower():
                return kind
        raise ParameterError(f"unknown basis kind '{name}', expected one of {[k.value for k in cls]}")


@dataclass(frozen=True)
class ControlBasis:
    """
    a family of p control functions on R^dim

    The batch evaluators map points of shape (..., dim) to
    values (..., p), gradients (..., p, dim) and Laplacians (..., p).
    Member indices are 0-based.
    """

    count: int
    dim: int
    kind: BasisKind
    values_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    gradients_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    laplacians_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    centers: Optional[Tuple[float, ...]] = None
    constant: bool = False

    @property
    def label(self) -> str:
        if self.kind == BasisKind.GAUSSIAN_KERNELS_1D:
            lo, hi = self.centers[0], self.centers[-1]
            label = f"gaussian_kernels({len(self.centers)},{lo:g},{hi:g})"
        else:
            label = self.kind.value
        if self.constant:
            label += "+1"
        return label

    def _points(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise ShapeError(f"basis of dimension {self.dim} evaluated at shape {x.shape}")
        return x

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.values_fn(self._points(x))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.gradients_fn(self._points(x))

    def laplacian(self, x: np.ndarray) -> np.ndarray:
        return self.laplacians_fn(self._points(x))

    def _member(self, i: int) -> int:
        if not 0 <= i < self.count:
            raise ParameterError(f"member index {i} out of range 0..{self.count - 1}")
        return i

    def psi(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.evaluate(x)[..., self._member(i)]

    def grad_psi(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.gradient(x)[..., self._member(i), :]

    def lap_psi(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.laplacian(x)[..., self._member(i)]

    def generator_values(self, potential: Potential, x: np.ndarray) -> np.ndarray:
        """
        L psi_i at the given points

        Args:
            potential: the target whose generator is applied
            x: points of shape (..., dim)

        Returns:
            np.ndarray: shape (..., p)
        """
        if potential.dim != self.dim:
            raise ShapeError(f"basis dimension {self.dim} does not match potential dimension {potential.dim}")
        x = self._points(x)
        grad_u = potential.grad_u(x)
        lvalues = -np.einsum("...d,...pd->...p", grad_u, self.gradients_fn(x)) + self.laplacians_fn(x)
        return lvalues

    def with_constant(self) -> "ControlBasis":
        """
        this basis augmented by the constant member 1 as last member
        """

        def values(x):
            v = self.values_fn(x)
            return np.concatenate([v, np.ones(v.shape[:-1] + (1,))], axis=-1)

        def gradients(x):
            g = self.gradients_fn(x)
            return np.concatenate([g, np.zeros(g.shape[:-2] + (1, self.dim))], axis=-2)

        def laplacians(x):
            lap = self.laplacians_fn(x)
            return np.concatenate([lap, np.zeros(lap.shape[:-1] + (1,))], axis=-1)

        augmented = ControlBasis(
            count=self.count + 1,
            dim=self.dim,
            kind=self.kind,
            values_fn=values,
            gradients_fn=gradients,
            laplacians_fn=laplacians,
            centers=self.centers,
            constant=True,
        )
        return augmented


def _check_dim(dim: int):
    if dim < 1:
        raise ParameterError(f"basis dimension must be positive but is {dim}")


def first_order_basis(dim: int) -> ControlBasis:
    """
    psi_i(x) = x_i for i = 1..dim
    """
    _check_dim(dim)
    eye = np.eye(dim)

    def values(x):
        return x.copy()

    def gradients(x):
        return np.broadcast_to(eye, x.shape[:-1] + (dim, dim)).copy()

    def laplacians(x):
        return np.zeros(x.shape[:-1] + (dim,))

    return ControlBasis(dim, dim, BasisKind.FIRST_ORDER, values, gradients, laplacians)


def cross_index(i: int, j: int, dim: int) -> int:
    """
    1-based member index of the cross term x_i x_j (1 <= j < i <= dim)
    in the second order basis: 2d + (j-1)(d - j/2) + (i-j)
    """
    if not 1 <= j < i <= dim:
        raise ParameterError(f"cross term needs 1 <= j < i <= dim but got i={i}, j={j}, dim={dim}")
    # (j-1)(2d-j) is always even
    k = 2 * dim + (j - 1) * (2 * dim - j) // 2 + (i - j)
    return k


def cross_pairs(dim: int) -> List[Tuple[int, int]]:
    """
    the 1-based pairs (i, j) ordered by their member index
    """
    pairs = [(i, j) for j in range(1, dim + 1) for i in range(j + 1, dim + 1)]
    pairs.sort(key=lambda pair: cross_index(pair[0], pair[1], dim))
    return pairs


def second_order_basis(dim: int) -> ControlBasis:
    """
    x_k, then x_k^2, then the cross terms x_i x_j (j < i), dim(dim+3)/2 members
    """
    _check_dim(dim)
    pairs = cross_pairs(dim)
    ii = np.array([i - 1 for i, _ in pairs], dtype=int)
    jj = np.array([j - 1 for _, j in pairs], dtype=int)
    n_cross = len(pairs)
    count = 2 * dim + n_cross
    cross_rows = 2 * dim + np.arange(n_cross)
    diag = np.arange(dim)

    def values(x):
        return np.concatenate([x, x * x, x[..., ii] * x[..., jj]], axis=-1)

    def gradients(x):
        g = np.zeros(x.shape[:-1] + (count, dim))
        g[..., diag, diag] = 1.0
        g[..., dim + diag, diag] = 2.0 * x
        g[..., cross_rows, ii] = x[..., jj]
        g[..., cross_rows, jj] = x[..., ii]
        return g

    def laplacians(x):
        lap = np.zeros(x.shape[:-1] + (count,))
        lap[..., dim : 2 * dim] = 2.0
        return lap

    return ControlBasis(count, dim, BasisKind.SECOND_ORDER, values, gradients, laplacians)


def kernel_centers(p: int, lo: float, hi: float) -> np.ndarray:
    """
    p equally spaced centers on [lo, hi] including both endpoints,
    the midpoint for p = 1
    """
    if p < 1:
        raise ParameterError(f"number of kernels must be positive but is {p}")
    if not lo < hi:
        raise ParameterError(f"kernel interval needs lo < hi but got [{lo}, {hi}]")
    if p == 1:
        centers = np.array([(lo + hi) / 2.0])
    else:
        centers = np.linspace(lo, hi, p)
    return centers


def gaussian_kernel_basis_1d(p: int, lo: float, hi: float) -> ControlBasis:
    """
    standard normal densities centered at p regularly spaced points of [lo, hi]
    """
    mu = kernel_centers(p, lo, hi)

    def values(x):
        d = x - mu
        return SQRT_2PI_INV * np.exp(-0.5 * d * d)

    def gradients(x):
        d = x - mu
        return (-d * SQRT_2PI_INV * np.exp(-0.5 * d * d))[..., np.newaxis]

    def laplacians(x):
        d = x - mu
        return (d * d - 1.0) * SQRT_2PI_INV * np.exp(-0.5 * d * d)

    return ControlBasis(p, 1, BasisKind.GAUSSIAN_KERNELS_1D, values, gradients, laplacians, centers=tuple(mu))


def generator_apply(p: Potential, b: ControlBasis, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    L g_theta(x) = sum_i theta_i (-<grad U(x), grad psi_i(x)> + Laplacian psi_i(x))

    Returns a scalar for a single point and a vector for a batch of points.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape[0] != b.count:
        raise ShapeError(f"theta has length {theta.shape[0]} but the basis has {b.count} members")
    lvalue = b.generator_values(p, x) @ theta
    return lvalue


BASIS_SPEC_PATTERN = re.compile(
    r"^\s*gaussian_kernels\s*[\(:]\s*(\d+)\s*[,:]\s*([-+0-9.eE]+)\s*[,:]\s*([-+0-9.eE]+)\s*\)?\s*$"
)


def basis_from_spec(spec: str, dim: int) -> ControlBasis:
    """
    build a basis from a spec string:
    first, second, gaussian_kernels(p,lo,hi) or gaussian_kernels:p:lo:hi
    """
    name = spec.strip()
    if name == BasisKind.FIRST_ORDER.value:
        basis = first_order_basis(dim)
    elif name == BasisKind.SECOND_ORDER.value:
        basis = second_order_basis(dim)
    else:
        match = BASIS_SPEC_PATTERN.match(name)
        if not match:
            raise ParameterError(f"invalid basis spec '{spec}'")
        if dim != 1:
            raise ParameterError(f"gaussian kernel bases are one dimensional but the target has dimension {dim}")
        try:
            p, lo, hi = int(match.group(1)), float(match.group(2)), float(match.group(3))
        except ValueError as e:
            raise ParameterError(f"invalid basis spec '{spec}': {e}")
        basis = gaussian_kernel_basis_1d(p, lo, hi)
    return basis
