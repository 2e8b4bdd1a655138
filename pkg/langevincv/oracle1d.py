"""
Created on 2026-10-18

Quadrature ground truth for one dimensional targets:
pi(f), the derivative of the Poisson equation solution, the asymptotic
variance and the exact optimal control variate coefficients.

@author: wf
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from langevincv.bases import ControlBasis, gaussian_kernel_basis_1d
from langevincv.cv import pinv, rank
from langevincv.errors import NumericError, ParameterError, ShapeError
from langevincv.potentials import Potential
from langevincv.testfunctions import Observable

logger = logging.getLogger(__name__)

MAX_NODES = 2**20 + 1
DEFAULT_NODES = 20001
DEFAULT_BOUNDARY = 5.0
# density below which the Poisson derivative is not evaluated
DENSITY_FLOOR = 1e-300

Integrand = Callable[[np.ndarray], np.ndarray]


class Normalization(Enum):
    """
    how the density is normalized on a truncated interval [-a, a]

    GLOBAL: by the normalizing constant over the whole line (the truncated mass may be below 1)
    TRUNCATED: by the integral over [-a, a]
    """

    GLOBAL = "global"
    TRUNCATED = "truncated"


@dataclass
class QuadratureGrid:
    """
    equally spaced odd number of nodes on [lo, hi] with composite Simpson weights
    """

    lo: float
    hi: float
    count: int = DEFAULT_NODES
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ParameterError(f"quadrature interval needs lo < hi but got [{self.lo}, {self.hi}]")
        if self.count < 3 or self.count % 2 == 0:
            raise ParameterError(f"Simpson quadrature needs an odd node count >= 3 but got {self.count}")
        self.nodes = np.linspace(self.lo, self.hi, self.count)
        h = (self.hi - self.lo) / (self.count - 1)
        weights = np.full(self.count, 2.0)
        weights[1::2] = 4.0
        weights[0] = weights[-1] = 1.0
        self.weights = weights * h / 3.0

    @classmethod
    def symmetric(cls, a: float, count: int = DEFAULT_NODES) -> "QuadratureGrid":
        if not a > 0:
            raise ParameterError(f"truncation boundary must be positive but is {a}")
        return cls(-a, a, count)

    @property
    def a(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.count - 1)

    @property
    def points(self) -> np.ndarray:
        """
        the nodes as (count, 1) points
        """
        return self.nodes[:, np.newaxis]

    def refined(self) -> "QuadratureGrid":
        """
        the grid with every interval halved
        """
        return QuadratureGrid(self.lo, self.hi, 2 * (self.count - 1) + 1)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


@dataclass
class QuadratureResult:
    """
    Attributes:
        value: the integral
        nodes: node count of the final grid
        converged: False if the refinement cap was hit
        change: the last difference between successive refinements
    """

    value: float
    nodes: int
    converged: bool
    change: float

    def __float__(self):
        return self.value


def integrate(grid: QuadratureGrid, integrand: Integrand, rtol: float = 1e-10, max_nodes: int = MAX_NODES) -> QuadratureResult:
    """
    composite Simpson integral with refinement by halving the intervals until
    successive values differ by less than rtol times the integral of |integrand|

    the integrand is called with the nodes as a 1-D array
    """
    values = np.asarray(integrand(grid.nodes), dtype=float)
    if not np.isfinite(values).all():
        raise NumericError("integrand is not finite on the quadrature nodes")
    value = grid.integrate(values)
    while True:
        if grid.count >= max_nodes:
            logger.warning(f"quadrature on [{grid.lo:g},{grid.hi:g}] not converged at {grid.count} nodes")
            return QuadratureResult(value, grid.count, False, float("nan"))
        grid = grid.refined()
        values = np.asarray(integrand(grid.nodes), dtype=float)
        if not np.isfinite(values).all():
            raise NumericError("integrand is not finite on the quadrature nodes")
        refined = grid.integrate(values)
        scale = grid.integrate(np.abs(values))
        change = abs(refined - value)
        value = refined
        if change <= rtol * scale:
            logger.debug(f"quadrature converged at {grid.count} nodes")
            return QuadratureResult(value, grid.count, True, change)


def _check_1d(p: Potential):
    if p.dim != 1:
        raise ShapeError(f"quadrature oracles need a one dimensional target but {p.label} has dimension {p.dim}")


def log_normalizer(p: Potential, hint: float = DEFAULT_BOUNDARY, rtol: float = 1e-10) -> float:
    """
    log of the integral of exp(-U) over the real line

    the support is widened from max(hint, 10) until the unnormalized density at its
    ends is negligible against the largest value seen
    """
    _check_1d(p)
    width = max(hint, 10.0)
    while True:
        probe = QuadratureGrid.symmetric(width, 4001)
        u_probe = p.u(probe.points)
        u_min = float(np.min(u_probe))
        edge = min(u_probe[0], u_probe[-1])
        # exp(-75) relative tails are below double precision of the total
        if edge - u_min > 75.0 or width >= 1e6:
            break
        width *= 2.0
    result = integrate(probe, lambda x: np.exp(-(p.u(x[:, np.newaxis]) - u_min)), rtol=rtol)
    if not result.value > 0:
        raise NumericError(f"{p.label}: normalizing integral underflowed")
    log_z = -u_min + float(np.log(result.value))
    logger.debug(f"{p.label}: log normalizer {log_z:.12g} on [-{width:g},{width:g}]")
    return log_z


@dataclass
class GridDensity:
    """
    the normalized density of a one dimensional target on a quadrature grid
    """

    grid: QuadratureGrid
    density: np.ndarray = field(repr=False)
    mass: float
    normalization: Normalization

    def expectation(self, values: np.ndarray) -> float:
        return self.grid.integrate(values * self.density)


def grid_density(
    p: Potential,
    grid: QuadratureGrid,
    normalization: Normalization = Normalization.GLOBAL,
    log_z: Optional[float] = None,
) -> GridDensity:
    _check_1d(p)
    u = p.u(grid.points)
    if not np.isfinite(u).all():
        raise NumericError(f"{p.label}: potential not finite on [{grid.lo:g},{grid.hi:g}]")
    if normalization == Normalization.GLOBAL:
        if log_z is None:
            log_z = log_normalizer(p, grid.a)
        density = np.exp(-(u + log_z))
        mass = grid.integrate(density)
    else:
        u_min = float(np.min(u))
        shifted = np.exp(-(u - u_min))
        total = grid.integrate(shifted)
        if not total > 0:
            raise NumericError(f"{p.label}: normalizing integral underflowed")
        density = shifted / total
        mass = 1.0
    return GridDensity(grid, density, mass, normalization)


def pi_expectation(
    p: Potential,
    grid: QuadratureGrid,
    f: Integrand,
    normalization: Normalization = Normalization.GLOBAL,
) -> float:
    """
    the integral of f pi over the grid interval

    f is called with points of shape (count, 1)
    """
    gd = grid_density(p, grid, normalization)
    pi_f = gd.expectation(np.asarray(f(grid.points), dtype=float))
    return pi_f


@dataclass
class PoissonDerivative:
    """
    f_hat'(x) = -(1/pi(x)) integral_{lo}^{x} pi(t)(f(t) - pi(f)) dt tabulated on the grid nodes

    Attributes:
        nodes: grid nodes
        values: f_hat' at the nodes, 0 where the density is below the floor
        valid: mask of nodes where the density exceeds the floor
        pi_f: the centering constant
    """

    nodes: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    valid: np.ndarray = field(repr=False)
    pi_f: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """
        linear interpolation between nodes
        """
        return np.interp(x, self.nodes, self.values)


def _poisson_derivative(gd: GridDensity, f_values: np.ndarray) -> PoissonDerivative:
    pi_f = gd.expectation(f_values)
    nodes = gd.grid.nodes
    cumulative = cumulative_trapezoid(gd.density * (f_values - pi_f), nodes, initial=0.0)
    valid = gd.density > DENSITY_FLOOR
    values = np.zeros_like(nodes)
    values[valid] = -cumulative[valid] / gd.density[valid]
    return PoissonDerivative(nodes, values, valid, pi_f)


def poisson_derivative(
    p: Potential,
    grid: QuadratureGrid,
    f: Integrand,
    normalization: Normalization = Normalization.GLOBAL,
) -> PoissonDerivative:
    gd = grid_density(p, grid, normalization)
    return _poisson_derivative(gd, np.asarray(f(grid.points), dtype=float))


def _sigma2(gd: GridDensity, fhat: PoissonDerivative) -> float:
    return 2.0 * gd.expectation(fhat.values**2)


def sigma2_inf(
    p: Potential,
    grid: QuadratureGrid,
    f: Integrand,
    normalization: Normalization = Normalization.GLOBAL,
) -> float:
    """
    the asymptotic variance 2 pi(f_hat'^2) of the Langevin diffusion
    """
    gd = grid_density(p, grid, normalization)
    fhat = _poisson_derivative(gd, np.asarray(f(grid.points), dtype=float))
    return _sigma2(gd, fhat)


@dataclass
class ExactMoments:
    """
    quadrature values of the CV pair (H, b) and the ZV pair (H_zv, b_zv)
    """

    h_matrix: np.ndarray
    b_vector: np.ndarray
    h_zv: np.ndarray
    b_zv: np.ndarray
    pi_f: float

    def __iter__(self):
        return iter((self.h_matrix, self.b_vector, self.h_zv, self.b_zv))


def _exact_moments(p: Potential, gd: GridDensity, basis: ControlBasis, f_values: np.ndarray) -> ExactMoments:
    if basis.dim != 1:
        raise ShapeError("exact moments need a one dimensional basis")
    points = gd.grid.points
    weighted = gd.grid.weights * gd.density
    pi_f = float(np.dot(weighted, f_values))
    centered = f_values - pi_f
    psi = basis.evaluate(points)
    dpsi = basis.gradient(points)[:, :, 0]
    lpsi = basis.generator_values(p, points)
    h_matrix = (dpsi * weighted[:, np.newaxis]).T @ dpsi
    b_vector = psi.T @ (weighted * centered)
    h_zv = (lpsi * weighted[:, np.newaxis]).T @ lpsi
    b_zv = lpsi.T @ (weighted * centered)
    moments = ExactMoments(
        h_matrix=0.5 * (h_matrix + h_matrix.T),
        b_vector=b_vector,
        h_zv=0.5 * (h_zv + h_zv.T),
        b_zv=b_zv,
        pi_f=pi_f,
    )
    return moments


def exact_moments(
    p: Potential,
    grid: QuadratureGrid,
    basis: ControlBasis,
    f: Integrand,
    normalization: Normalization = Normalization.GLOBAL,
) -> ExactMoments:
    gd = grid_density(p, grid, normalization)
    return _exact_moments(p, gd, basis, np.asarray(f(grid.points), dtype=float))


def _solve(h_matrix: np.ndarray, b_vector: np.ndarray, name: str) -> np.ndarray:
    p = b_vector.shape[0]
    r = rank(h_matrix)
    if r < p:
        logger.warning(f"{name}: H has rank {r} < {p}, using the pseudoinverse")
    return pinv(h_matrix) @ b_vector


def _thetas(moments: ExactMoments) -> Tuple[np.ndarray, np.ndarray]:
    theta_star = _solve(moments.h_matrix, moments.b_vector, "theta*")
    theta_zv = -_solve(moments.h_zv, moments.b_zv, "theta_zv")
    return theta_star, theta_zv


def exact_theta(
    p: Potential,
    grid: QuadratureGrid,
    basis: ControlBasis,
    f: Integrand,
    normalization: Normalization = Normalization.GLOBAL,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    theta* = H^-1 b minimizing the asymptotic variance and theta_zv = -H_zv^-1 b_zv
    """
    return _thetas(exact_moments(p, grid, basis, f, normalization))


def sigma2_with_cv(sigma2_f: float, h_matrix: np.ndarray, b_vector: np.ndarray, theta: np.ndarray) -> float:
    """
    sigma2(f + L g_theta) = 2 theta^T H theta - 4 <theta, b> + sigma2(f)
    """
    theta = np.asarray(theta, dtype=float)
    h_matrix = np.asarray(h_matrix, dtype=float)
    b_vector = np.asarray(b_vector, dtype=float)
    if h_matrix.shape != (theta.shape[0], theta.shape[0]) or b_vector.shape != theta.shape:
        raise ShapeError(f"H {h_matrix.shape}, b {b_vector.shape} and theta {theta.shape} do not fit")
    value = 2.0 * theta @ h_matrix @ theta - 4.0 * theta @ b_vector + sigma2_f
    return float(value)


@dataclass
class OracleReport:
    """
    exact quantities of a one dimensional experiment at truncation boundary a
    """

    a: float
    mass: float
    pi_f: float
    sigma2_f: float
    H: np.ndarray
    b: np.ndarray
    theta_star: np.ndarray
    theta_zv: np.ndarray
    sigma2_cv: float
    sigma2_zv: float
    H_zv: Optional[np.ndarray] = None
    b_zv: Optional[np.ndarray] = None
    nodes: int = DEFAULT_NODES
    converged: bool = True
    normalization: str = Normalization.GLOBAL.value
    basis: str = ""

    def as_dict(self) -> dict:
        record = {}
        for key, value in self.__dict__.items():
            record[key] = value.tolist() if isinstance(value, np.ndarray) else value
        return record


def _report(
    p: Potential,
    basis: ControlBasis,
    f: Integrand,
    grid: QuadratureGrid,
    normalization: Normalization,
    log_z: Optional[float],
) -> OracleReport:
    gd = grid_density(p, grid, normalization, log_z=log_z)
    f_values = np.asarray(f(grid.points), dtype=float)
    fhat = _poisson_derivative(gd, f_values)
    sigma2_f = _sigma2(gd, fhat)
    moments = _exact_moments(p, gd, basis, f_values)
    theta_star, theta_zv = _thetas(moments)
    report = OracleReport(
        a=grid.a,
        mass=gd.mass,
        pi_f=moments.pi_f,
        sigma2_f=sigma2_f,
        H=moments.h_matrix,
        b=moments.b_vector,
        theta_star=theta_star,
        theta_zv=theta_zv,
        sigma2_cv=sigma2_with_cv(sigma2_f, moments.h_matrix, moments.b_vector, theta_star),
        sigma2_zv=sigma2_with_cv(sigma2_f, moments.h_matrix, moments.b_vector, theta_zv),
        H_zv=moments.h_zv,
        b_zv=moments.b_zv,
        nodes=grid.count,
        normalization=normalization.value,
        basis=basis.label,
    )
    return report


def oracle_report(
    p: Potential,
    basis: ControlBasis,
    f: Integrand,
    a: float = DEFAULT_BOUNDARY,
    nodes: int = DEFAULT_NODES,
    normalization: Normalization = Normalization.GLOBAL,
    rtol: float = 1e-7,
    refine: bool = True,
    log_z: Optional[float] = None,
) -> OracleReport:
    """
    all exact quantities on [-a, a]

    with refine the grid is refined until sigma2_f and both coefficient vectors
    change by less than rtol (relative) between successive levels
    """
    _check_1d(p)
    if normalization == Normalization.GLOBAL and log_z is None:
        log_z = log_normalizer(p, a)
    grid = QuadratureGrid.symmetric(a, nodes)
    report = _report(p, basis, f, grid, normalization, log_z)
    if not refine:
        return report
    while True:
        if grid.count >= MAX_NODES:
            report.converged = False
            logger.warning(f"oracle at a={a:g} not converged at {grid.count} nodes")
            return report
        grid = grid.refined()
        refined = _report(p, basis, f, grid, normalization, log_z)
        changes = [
            abs(refined.sigma2_f - report.sigma2_f) / max(abs(refined.sigma2_f), 1e-300),
            _relative_change(refined.theta_star, report.theta_star),
            _relative_change(refined.theta_zv, report.theta_zv),
        ]
        report = refined
        if max(changes) <= rtol:
            logger.debug(f"oracle at a={a:g} converged at {grid.count} nodes")
            return report


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(new))) if new.size else 0.0, 1e-300)
    return float(np.max(np.abs(new - old))) / scale if new.size else 0.0


def truncation_sweep(
    p: Potential,
    basis: ControlBasis,
    f: Integrand,
    boundaries: Sequence[float] = (3.0, 4.0, 5.0, 6.0),
    nodes: int = DEFAULT_NODES,
    normalization: Normalization = Normalization.GLOBAL,
    refine: bool = True,
) -> List[OracleReport]:
    """
    one oracle report per truncation boundary
    """
    _check_1d(p)
    log_z = log_normalizer(p, max(boundaries)) if normalization == Normalization.GLOBAL else None
    reports = []
    for a in boundaries:
        report = oracle_report(p, basis, f, a, nodes, normalization, refine=refine, log_z=log_z)
        logger.info(
            f"a={a:g}: mass={report.mass:.8f} sigma2={report.sigma2_f:.4f} "
            f"theta*_1={report.theta_star[0]:.4f} theta_zv_1={report.theta_zv[0]:.4f}"
        )
        reports.append(report)
    return reports


@dataclass
class BasisSweepRow:
    """
    asymptotic variances with the optimal and the zero variance coefficients
    for a given number of kernels
    """

    count: int
    sigma2_f: float
    sigma2_cv: float
    sigma2_zv: float


def basis_sweep(
    p: Potential,
    f: Integrand,
    counts: Sequence[int] = tuple(range(4, 11)),
    lo: float = -4.0,
    hi: float = 4.0,
    a: float = DEFAULT_BOUNDARY,
    nodes: int = DEFAULT_NODES,
) -> List[BasisSweepRow]:
    """
    sigma2 with theta* and theta_zv as a function of the number of Gaussian kernels
    """
    _check_1d(p)
    grid = QuadratureGrid.symmetric(a, nodes)
    gd = grid_density(p, grid)
    f_values = np.asarray(f(grid.points), dtype=float)
    sigma2_f = _sigma2(gd, _poisson_derivative(gd, f_values))
    rows = []
    for count in counts:
        moments = _exact_moments(p, gd, gaussian_kernel_basis_1d(count, lo, hi), f_values)
        theta_star, theta_zv = _thetas(moments)
        row = BasisSweepRow(
            count=count,
            sigma2_f=sigma2_f,
            sigma2_cv=sigma2_with_cv(sigma2_f, moments.h_matrix, moments.b_vector, theta_star),
            sigma2_zv=sigma2_with_cv(sigma2_f, moments.h_matrix, moments.b_vector, theta_zv),
        )
        rows.append(row)
    return rows


def poisson_table(
    p: Potential,
    f: Integrand,
    boundaries: Sequence[float] = (3.0, 4.0, 5.0, 6.0),
    points: int = 601,
    nodes: int = DEFAULT_NODES,
) -> Tuple[np.ndarray, Dict[float, np.ndarray]]:
    """
    f_hat' for each truncation boundary on a common set of points spanning the widest interval;
    values outside [-a, a] are NaN

    Returns:
        the points and a map from boundary to the tabulated derivative
    """
    _check_1d(p)
    widest = max(boundaries)
    x = np.linspace(-widest, widest, points)
    log_z = log_normalizer(p, widest)
    columns = {}
    for a in boundaries:
        grid = QuadratureGrid.symmetric(a, nodes)
        gd = grid_density(p, grid, log_z=log_z)
        fhat = _poisson_derivative(gd, np.asarray(f(grid.points), dtype=float))
        column = fhat(x)
        column[np.abs(x) > a] = np.nan
        columns[a] = column
    return x, columns


def ula_pullback(p: Potential, nodes: int, gamma: float, f: Integrand, x: float) -> float:
    """
    R_gamma f(x) = E f(x - gamma U'(x) + sqrt(2 gamma) Z) by Gauss-Hermite quadrature
    """
    _check_1d(p)
    t, w = np.polynomial.hermite.hermgauss(nodes)
    mean = x - gamma * float(p.grad_u(np.array([x]))[0])
    y = mean + np.sqrt(2.0 * gamma) * np.sqrt(2.0) * t
    value = float(np.dot(w, np.asarray(f(y[:, np.newaxis]), dtype=float)) / np.sqrt(np.pi))
    return value


@dataclass
class GeneratorOrder:
    """
    residuals |R_gamma f(x) - f(x) - gamma L f(x)| and their log-log slope in gamma
    """

    gammas: np.ndarray
    residuals: np.ndarray
    slope: float


def generator_order(
    pullback: Callable[[Potential, float, Observable, float], float],
    p: Potential,
    f: Observable,
    x: float,
    gammas: Sequence[float] = tuple(np.logspace(-3, -1, 5)),
) -> GeneratorOrder:
    """
    fit the order alpha in R_gamma f = f + gamma L f + O(gamma^alpha)

    Args:
        pullback: callable (potential, gamma, f, x) -> R_gamma f(x)
    """
    point = np.array([[x]], dtype=float)
    fx = float(f(point)[0])
    lf = float(f.generator(p, point)[0])
    gammas = np.asarray(gammas, dtype=float)
    residuals = np.array([abs(pullback(p, g, f, x) - fx - g * lf) for g in gammas])
    if (residuals <= 0).any():
        raise NumericError("zero residual, the generator order cannot be fitted")
    slope = float(np.polyfit(np.log(gammas), np.log(residuals), 1)[0])
    return GeneratorOrder(gammas, residuals, slope)
