"""
Created on 2026-10-18

Target distributions pi proportional to exp(-U) given by the potential U and its gradient.

All evaluators accept a single point of shape (dim,) or a batch of shape (m, dim)
and are pure functions of their input. Additive constants of U are dropped.

@author: wf
"""

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit, log_ndtr

from langevincv.errors import (
    ConvergenceError,
    DataError,
    IngestionError,
    ParameterError,
    ShapeError,
)

logger = logging.getLogger(__name__)

ArrayFunction = Callable[[np.ndarray], np.ndarray]

# below this argument the probit ratio uses the asymptotic expansion
PROBIT_SERIES_THRESHOLD = -8.0
PROBIT_SERIES_TERMS = 24
LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass
class RegressionData:
    """
    binary regression dataset

    Attributes:
        design: N x dim design matrix, one observation per row
        labels: length N vector of 0/1 responses
        prior_variance: variance of the isotropic Gaussian prior on the coefficients
    """

    design: np.ndarray
    labels: np.ndarray
    prior_variance: float = 100.0
    columns: Optional[Sequence[str]] = None

    def __post_init__(self):
        self.design = np.atleast_2d(np.asarray(self.design, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float).ravel()
        if self.design.shape[0] < 1:
            raise DataError("regression data needs at least one observation")
        if self.design.shape[0] != self.labels.shape[0]:
            raise DataError(
                f"design has {self.design.shape[0]} rows but there are {self.labels.shape[0]} labels"
            )
        if np.isnan(self.design).any():
            raise DataError("design matrix contains NaN entries")
        if not np.isin(self.labels, (0.0, 1.0)).all():
            raise DataError("labels must be 0 or 1")
        if not self.prior_variance > 0:
            raise ParameterError(f"prior variance must be positive but is {self.prior_variance}")

    @property
    def n_obs(self) -> int:
        return self.design.shape[0]

    @property
    def dim(self) -> int:
        return self.design.shape[1]


class RegressionModel(Enum):
    """
    link function of a binary regression
    """

    LOGISTIC = "logistic"
    PROBIT = "probit"

    def link(self, t: np.ndarray) -> np.ndarray:
        """
        success probability for the linear predictor t
        """
        if self == RegressionModel.LOGISTIC:
            prob = expit(t)
        else:
            prob = np.exp(log_ndtr(t))
        return prob


@dataclass(frozen=True)
class Potential:
    """
    a target density known through its potential energy U

    Attributes:
        dim: dimension of the state space
        u: potential energy (nats) mapping (..., dim) -> (...)
        grad_u: gradient of u mapping (..., dim) -> (..., dim)
        label: short identifier
        data: the regression dataset for posterior targets
    """

    dim: int
    u: ArrayFunction = field(repr=False)
    grad_u: ArrayFunction = field(repr=False)
    label: str = "potential"
    data: Optional[RegressionData] = field(default=None, repr=False)

    def check_point(self, x: np.ndarray) -> np.ndarray:
        """
        convert x to a float array and check its trailing dimension
        """
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise ShapeError(f"{self.label}: expected points of dimension {self.dim} but got shape {x.shape}")
        return x

    def energy(self, x: np.ndarray) -> Union[float, np.ndarray]:
        x = self.check_point(x)
        return self.u(x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = self.check_point(x)
        return self.grad_u(x)

    def gradient_error(self, x: np.ndarray, step: float = 1e-5) -> float:
        """
        maximum relative deviation of the analytic gradient at x
        from central finite differences of the potential

        Args:
            x: a single point of shape (dim,)
            step: finite difference step

        Returns:
            float: max_i |g_i - fd_i| / max(|fd_i|, 1)
        """
        x = self.check_point(x)
        shifts = step * np.eye(self.dim)
        fd = (self.u(x + shifts) - self.u(x - shifts)) / (2.0 * step)
        grad = self.grad_u(x)
        error = float(np.max(np.abs(grad - fd) / np.maximum(np.abs(fd), 1.0)))
        return error


def mixture1d_potential(means: Tuple[float, float] = (-1.0, 1.0), variance: float = 0.5) -> Potential:
    """
    equally weighted mixture of two Gaussians with common variance

    Args:
        means: the two component means
        variance: the common component variance

    Returns:
        Potential: U(x) = -log(phi_1(x)/2 + phi_2(x)/2) up to a constant
    """
    if not variance > 0:
        raise ParameterError(f"mixture variance must be positive but is {variance}")
    mu = np.asarray(means, dtype=float)
    if mu.shape != (2,):
        raise ParameterError(f"mixture needs exactly two means but got {means}")

    def exponents(x: np.ndarray) -> np.ndarray:
        return -((x - mu) ** 2) / (2.0 * variance)

    def u(x: np.ndarray) -> np.ndarray:
        e = exponents(x)
        return -np.logaddexp(e[..., 0], e[..., 1])

    def grad_u(x: np.ndarray) -> np.ndarray:
        e = exponents(x)
        # responsibilities of the two components
        w = np.exp(e - np.logaddexp(e[..., :1], e[..., 1:]))
        return np.sum(w * (x - mu), axis=-1, keepdims=True) / variance

    label = f"mixture1d({mu[0]:g},{mu[1]:g};{variance:g})"
    return Potential(dim=1, u=u, grad_u=grad_u, label=label)


def gaussian_potential(dim: int, precision: Union[float, np.ndarray, None] = None) -> Potential:
    """
    centered Gaussian with the given precision matrix

    Args:
        dim: dimension
        precision: dim x dim symmetric positive definite matrix (scalar allowed for dim=1), identity if None

    Returns:
        Potential: U(x) = x^T Lambda x / 2
    """
    if dim < 1:
        raise ParameterError(f"dimension must be positive but is {dim}")
    if precision is None:
        precision = np.eye(dim)
    lam = np.atleast_2d(np.asarray(precision, dtype=float))
    if lam.shape != (dim, dim):
        raise ShapeError(f"precision must be {dim}x{dim} but has shape {lam.shape}")
    if not np.allclose(lam, lam.T, rtol=1e-12, atol=1e-12):
        raise ParameterError("precision matrix is not symmetric")
    try:
        np.linalg.cholesky(lam)
    except np.linalg.LinAlgError as e:
        raise ParameterError(f"precision matrix is not positive definite: {e}")

    def u(x: np.ndarray) -> np.ndarray:
        return 0.5 * np.einsum("...i,ij,...j->...", x, lam, x)

    def grad_u(x: np.ndarray) -> np.ndarray:
        return x @ lam

    return Potential(dim=dim, u=u, grad_u=grad_u, label=f"gaussian{dim}d")


def logistic_potential(data: RegressionData) -> Potential:
    """
    posterior potential of a Bayesian logistic regression with isotropic Gaussian prior
    """
    design, labels, inv_var = data.design, data.labels, 1.0 / data.prior_variance
    xty = design.T @ labels

    def u(x: np.ndarray) -> np.ndarray:
        t = x @ design.T
        # log(1+e^t) evaluated without overflow
        nll = np.sum(np.logaddexp(0.0, t), axis=-1) - x @ xty
        return nll + 0.5 * inv_var * np.sum(x * x, axis=-1)

    def grad_u(x: np.ndarray) -> np.ndarray:
        t = x @ design.T
        return expit(t) @ design - xty + inv_var * x

    return Potential(dim=data.dim, u=u, grad_u=grad_u, label="logistic", data=data)


def probit_ratio(t: Union[float, np.ndarray]) -> np.ndarray:
    """
    h'(t) = Phi'(t)/Phi(t), the derivative of log Phi

    For t <= -8 the ratio is evaluated by the asymptotic expansion
    s(1 + s^-2 - 2 s^-4 + ...) with s = -t, obtained by inverting the
    Mills ratio series sum_k (-1)^k (2k-1)!! s^-2k carried far enough
    to be continuous with the direct branch to double precision.
    """
    t = np.asarray(t, dtype=float)
    ratio = np.empty_like(t)
    tail = t <= PROBIT_SERIES_THRESHOLD
    direct = ~tail
    td = t[direct]
    ratio[direct] = np.exp(-0.5 * td * td - LOG_SQRT_2PI - log_ndtr(td))
    if tail.any():
        s = -t[tail]
        inv_s2 = 1.0 / (s * s)
        # Mills ratio times s: 1 - s^-2 + 3 s^-4 - 15 s^-6 + ...
        mills = np.ones_like(s)
        term = np.ones_like(s)
        for k in range(1, PROBIT_SERIES_TERMS + 1):
            term = -term * (2 * k - 1) * inv_s2
            mills += term
        ratio[tail] = s / mills
    return ratio


def probit_potential(data: RegressionData) -> Potential:
    """
    posterior potential of a Bayesian probit regression with isotropic Gaussian prior
    """
    design, labels, inv_var = data.design, data.labels, 1.0 / data.prior_variance

    def u(x: np.ndarray) -> np.ndarray:
        t = x @ design.T
        ll = labels * log_ndtr(t) + (1.0 - labels) * log_ndtr(-t)
        return -np.sum(ll, axis=-1) + 0.5 * inv_var * np.sum(x * x, axis=-1)

    def grad_u(x: np.ndarray) -> np.ndarray:
        t = x @ design.T
        weights = (1.0 - labels) * probit_ratio(-t) - labels * probit_ratio(t)
        return weights @ design + inv_var * x

    return Potential(dim=data.dim, u=u, grad_u=grad_u, label="probit", data=data)


def regression_potential(data: RegressionData, model: RegressionModel) -> Potential:
    if model == RegressionModel.LOGISTIC:
        potential = logistic_potential(data)
    else:
        potential = probit_potential(data)
    return potential


def find_mode(
    p: Potential,
    x0: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 10000,
    armijo: float = 1e-4,
    shrink: float = 0.5,
) -> np.ndarray:
    """
    minimize U by gradient descent with a backtracking line search

    Args:
        p: the potential
        x0: start point
        tol: stop when the gradient norm is at most tol
        max_iter: iteration budget
        armijo: sufficient decrease constant
        shrink: step reduction factor

    Returns:
        np.ndarray: a point with |grad U| <= tol

    Raises:
        ConvergenceError: if max_iter iterations do not reach tol
    """
    if not tol > 0 or max_iter < 1:
        raise ParameterError("find_mode needs tol > 0 and max_iter >= 1")
    x = p.check_point(np.array(x0, dtype=float, copy=True))
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(f"{p.label}: gradient check at start {p.gradient_error(x):.2e}")
    ux = float(p.u(x))
    g = p.grad_u(x)
    gnorm = float(np.linalg.norm(g))
    step = 1.0
    roundoff = 4.0 * np.finfo(float).eps
    for iteration in range(max_iter):
        if gnorm <= tol:
            logger.debug(f"{p.label}: mode found after {iteration} iterations, |grad|={gnorm:.3e}")
            return x
        # the previous accepted step is a good first trial
        step = min(2.0 * step, 1e6)
        while True:
            candidate = x - step * g
            uc = float(p.u(candidate))
            g_candidate = None
            if np.isfinite(uc):
                if abs(ux - uc) <= roundoff * max(abs(ux), 1.0):
                    # U no longer resolves the decrease, ask for a smaller gradient instead
                    g_candidate = p.grad_u(candidate)
                    if np.linalg.norm(g_candidate) < gnorm:
                        break
                elif uc <= ux - armijo * step * gnorm * gnorm:
                    break
            step *= shrink
            if step < 1e-300:
                raise ConvergenceError(f"{p.label}: line search failed", x=x, grad_norm=gnorm)
        x, ux = candidate, uc
        g = p.grad_u(x) if g_candidate is None else g_candidate
        gnorm = float(np.linalg.norm(g))
    if gnorm <= tol:
        return x
    raise ConvergenceError(f"{p.label}: no mode within {max_iter} iterations", x=x, grad_norm=gnorm)


def load_regression_csv(
    path: Union[str, Path],
    label_column: str = "y",
    intercept: bool = False,
    prior_variance: float = 100.0,
) -> RegressionData:
    """
    read a binary regression dataset from a comma separated file with header row

    Args:
        path: the csv file
        label_column: name of the 0/1 response column, all other columns are covariates
        intercept: if True prepend a constant 1 column to the design
        prior_variance: prior variance to attach to the data

    Returns:
        RegressionData: the dataset

    Raises:
        IngestionError: for a missing file, a missing label column, ragged rows,
            unparseable numbers or labels other than 0/1; row numbers are 1-based data rows
    """
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"dataset file {path} not found")
    with open(path, encoding="utf-8", newline="") as csv_file:
        reader = csv.reader(csv_file)
        header = next(reader, None)
        if header is None:
            raise IngestionError(f"{path} is empty, a header row is required")
        header = [name.strip() for name in header]
        if label_column not in header:
            raise IngestionError(f"label column '{label_column}' not in header {header}")
        label_index = header.index(label_column)
        covariates = [name for i, name in enumerate(header) if i != label_index]
        rows, labels = [], []
        for row_index, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise IngestionError(f"expected {len(header)} fields but found {len(row)}", row=row_index)
            try:
                values = [float(cell) for cell in row]
            except ValueError as e:
                raise IngestionError(f"not a number: {e}", row=row_index)
            label = values.pop(label_index)
            if label not in (0.0, 1.0):
                raise IngestionError(f"label '{row[label_index].strip()}' is not 0 or 1", row=row_index)
            rows.append(values)
            labels.append(label)
    if not rows:
        raise IngestionError(f"{path} has no data rows")
    design = np.asarray(rows, dtype=float).reshape(len(rows), len(covariates))
    if intercept:
        design = np.hstack([np.ones((design.shape[0], 1)), design])
        covariates = ["intercept"] + covariates
    data = RegressionData(design=design, labels=np.asarray(labels), prior_variance=prior_variance, columns=covariates)
    logger.info(f"loaded {data.n_obs} observations with {data.dim} covariates from {path}")
    return data


def default_coefficients(dim: int) -> np.ndarray:
    """
    the fixed true coefficient vector (1, -1, 0.5, -0.5, ...)/sqrt(dim) of synthetic datasets
    """
    magnitudes = 1.0 / (1.0 + np.arange(dim) // 2)
    signs = np.where(np.arange(dim) % 2 == 0, 1.0, -1.0)
    return signs * magnitudes / np.sqrt(dim)


def synthetic_regression_data(
    n_obs: int,
    dim: int,
    seed: int,
    model: RegressionModel = RegressionModel.LOGISTIC,
    true_coef: Optional[np.ndarray] = None,
    prior_variance: float = 100.0,
    intercept: bool = False,
) -> RegressionData:
    """
    seeded synthetic binary regression dataset

    Rows are standard normal (with a leading column of ones if intercept is set),
    labels are Bernoulli draws from the model at the true coefficient vector.
    """
    if n_obs < 1 or dim < 1:
        raise ParameterError(f"synthetic data needs n_obs >= 1 and dim >= 1, got {n_obs}, {dim}")
    rng = np.random.default_rng(seed)
    design = rng.standard_normal((n_obs, dim))
    if intercept:
        design[:, 0] = 1.0
    beta = default_coefficients(dim) if true_coef is None else np.asarray(true_coef, dtype=float)
    if beta.shape != (dim,):
        raise ShapeError(f"true coefficients must have shape ({dim},) but have {beta.shape}")
    labels = (rng.random(n_obs) < model.link(design @ beta)).astype(float)
    columns = [f"x{i + 1}" for i in range(dim)]
    return RegressionData(design=design, labels=labels, prior_variance=prior_variance, columns=columns)
