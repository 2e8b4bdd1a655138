"""
Created on 2026-10-18

Control variate coefficients by empirical asymptotic variance minimization (CV)
and by the zero variance criterion (ZV), and the resulting estimators of pi(f).

@author: wf
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np

from langevincv.bases import ControlBasis
from langevincv.errors import DataError, NumericError, ShapeError
from langevincv.potentials import Potential
from langevincv.samplers import ChainOutput

logger = logging.getLogger(__name__)

# rows per vectorized moment chunk
CHUNK_SIZE = 65536

TestFunction = Callable[[np.ndarray], np.ndarray]


class Method(Enum):
    """
    how an estimate of pi(f) is formed
    """

    PLAIN = "plain"
    CV = "CV"
    ZV = "ZV"

    @classmethod
    def of_name(cls, name: str) -> "Method":
        for method in cls:
            if method.value.lower() == name.lower():
                return method
        raise ValueError(f"unknown method '{name}'")


@dataclass(frozen=True)
class Moments:
    """
    the moment pair (H, b) of a fitting criterion

    Attributes:
        h_matrix: p x p symmetric matrix
        b_vector: length p vector
        mean_f: the centering constant of f
        m: number of samples (0 for exact moments)
        method: the criterion the moments belong to
    """

    h_matrix: np.ndarray
    b_vector: np.ndarray
    mean_f: float
    m: int
    method: Method

    def __iter__(self):
        # allows H, b, mean_f = moments
        return iter((self.h_matrix, self.b_vector, self.mean_f))


@dataclass(frozen=True)
class CvFit:
    """
    fitted coefficients theta of g_theta = <theta, psi>

    Attributes:
        theta: the coefficients
        h_matrix: H_m (CV) or H_zv (ZV)
        b_vector: b_m (CV) or b_zv (ZV)
        method: CV or ZV
        sample_mean_f: the centering constant
        m: number of fitting samples (0 for exact moments)
    """

    theta: np.ndarray
    h_matrix: np.ndarray
    b_vector: np.ndarray
    method: Method
    sample_mean_f: float
    m: int

    def control_values(self, potential: Potential, basis: ControlBasis, x: np.ndarray) -> np.ndarray:
        """
        L g_theta at the given points
        """
        if basis.count != self.theta.shape[0]:
            raise ShapeError(f"fit has {self.theta.shape[0]} coefficients but the basis has {basis.count} members")
        lg = basis.generator_values(potential, x) @ self.theta
        return lg

    def as_dict(self) -> dict:
        record = {
            "method": self.method.value,
            "theta": self.theta.tolist(),
            "h_matrix": self.h_matrix.tolist(),
            "b_vector": self.b_vector.tolist(),
            "sample_mean_f": self.sample_mean_f,
            "m": self.m,
        }
        return record


class KahanAccumulator:
    """
    compensated summation of equally shaped arrays
    """

    def __init__(self, shape: Tuple[int, ...]):
        self.total = np.zeros(shape)
        self.compensation = np.zeros(shape)

    def add(self, value: np.ndarray):
        y = value - self.compensation
        t = self.total + y
        self.compensation = (t - self.total) - y
        self.total = t


def _samples(chain: ChainOutput, basis: ControlBasis) -> np.ndarray:
    samples = chain.samples
    if samples.shape[0] == 0:
        raise DataError("chain has no samples")
    if samples.shape[1] != basis.dim:
        raise ShapeError(f"chain dimension {samples.shape[1]} does not match basis dimension {basis.dim}")
    return samples


def _centered(f: TestFunction, samples: np.ndarray) -> Tuple[np.ndarray, float]:
    values = np.asarray(f(samples), dtype=float).reshape(samples.shape[0])
    mean_f = math.fsum(values) / values.shape[0]
    return values - mean_f, mean_f


def _accumulate(
    samples: np.ndarray,
    centered: np.ndarray,
    features: Callable[[np.ndarray], np.ndarray],
    gram: Callable[[np.ndarray], np.ndarray],
    p: int,
) -> Tuple[np.ndarray, np.ndarray]:
    m = samples.shape[0]
    h_sum = KahanAccumulator((p, p))
    b_sum = KahanAccumulator((p,))
    for start in range(0, m, CHUNK_SIZE):
        chunk = samples[start : start + CHUNK_SIZE]
        h_sum.add(gram(chunk))
        b_sum.add(features(chunk).T @ centered[start : start + CHUNK_SIZE])
    h_matrix = h_sum.total / m
    # enforce exact symmetry
    h_matrix = 0.5 * (h_matrix + h_matrix.T)
    return h_matrix, b_sum.total / m


def cv_moments(chain: ChainOutput, p: Potential, basis: ControlBasis, f: TestFunction) -> Moments:
    """
    H_m = mean of <grad psi_i, grad psi_j> and b_m = mean of psi_i (f - mean f) over the chain
    """
    samples = _samples(chain, basis)
    centered, mean_f = _centered(f, samples)

    def gram(chunk):
        grads = basis.gradient(chunk)
        return np.einsum("kid,kjd->ij", grads, grads)

    h_matrix, b_vector = _accumulate(samples, centered, basis.evaluate, gram, basis.count)
    moments = Moments(h_matrix, b_vector, mean_f, samples.shape[0], Method.CV)
    return moments


def zv_moments(chain: ChainOutput, p: Potential, basis: ControlBasis, f: TestFunction) -> Moments:
    """
    H_zv = mean of L psi_i L psi_j and b_zv = mean of (f - mean f) L psi_i over the chain
    """
    samples = _samples(chain, basis)
    centered, mean_f = _centered(f, samples)

    def features(chunk):
        return basis.generator_values(p, chunk)

    def gram(chunk):
        lvalues = features(chunk)
        return lvalues.T @ lvalues

    h_matrix, b_vector = _accumulate(samples, centered, features, gram, basis.count)
    moments = Moments(h_matrix, b_vector, mean_f, samples.shape[0], Method.ZV)
    return moments


def pinv(a: np.ndarray, rcond: Optional[float] = None) -> np.ndarray:
    """
    Moore-Penrose pseudoinverse by singular value decomposition

    Args:
        a: square matrix
        rcond: relative cutoff, singular values below rcond * sigma_max are dropped;
            defaults to p * machine epsilon

    Raises:
        NumericError: if the SVD does not converge or a is not finite
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ShapeError(f"pinv needs a matrix but got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NumericError("pinv of a matrix with non finite entries")
    if rcond is None:
        rcond = max(a.shape) * np.finfo(float).eps
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"SVD did not converge: {e}")
    cutoff = rcond * (s[0] if s.size else 0.0)
    keep = s > cutoff
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    a_pinv = (vt.T * s_inv) @ u.T
    return a_pinv


def rank(a: np.ndarray, rcond: Optional[float] = None) -> int:
    s = np.linalg.svd(np.asarray(a, dtype=float), compute_uv=False)
    if rcond is None:
        rcond = max(np.shape(a)) * np.finfo(float).eps
    return int(np.sum(s > rcond * (s[0] if s.size else 0.0)))


def fit(moments: Moments, method: Optional[Method] = None) -> CvFit:
    """
    theta = H^+ b for CV and theta = -H^+ b for ZV

    Args:
        moments: the moments of the criterion
        method: CV or ZV, defaults to the criterion the moments were computed for
    """
    if method is None:
        method = moments.method
    h_matrix, b_vector = moments.h_matrix, moments.b_vector
    if h_matrix.shape != (b_vector.shape[0], b_vector.shape[0]):
        raise ShapeError(f"H has shape {h_matrix.shape} but b has length {b_vector.shape[0]}")
    theta = pinv(h_matrix) @ b_vector
    if method == Method.ZV:
        theta = -theta
    elif method != Method.CV:
        raise ValueError(f"cannot fit coefficients for method {method}")
    cv_fit = CvFit(
        theta=theta,
        h_matrix=h_matrix,
        b_vector=b_vector,
        method=method,
        sample_mean_f=moments.mean_f,
        m=moments.m,
    )
    return cv_fit


def fit_chain(chain: ChainOutput, p: Potential, basis: ControlBasis, f: TestFunction, method: Method) -> CvFit:
    if method == Method.CV:
        moments = cv_moments(chain, p, basis, f)
    else:
        moments = zv_moments(chain, p, basis, f)
    return fit(moments, method)


def fit_from_oracle(theta: np.ndarray, h_matrix: np.ndarray, b_vector: np.ndarray, pi_f: float, method: Method) -> CvFit:
    """
    wrap exact quadrature coefficients as a fit
    """
    cv_fit = CvFit(
        theta=np.asarray(theta, dtype=float),
        h_matrix=np.asarray(h_matrix, dtype=float),
        b_vector=np.asarray(b_vector, dtype=float),
        method=method,
        sample_mean_f=pi_f,
        m=0,
    )
    return cv_fit


def corrected_series(chain: ChainOutput, p: Potential, basis: ControlBasis, cv_fit: CvFit, f: TestFunction) -> np.ndarray:
    """
    the values f(X_k) + L g_theta(X_k) along the chain
    """
    samples = chain.samples
    if samples.shape[0] == 0:
        raise DataError("chain has no samples")
    series = np.empty(samples.shape[0])
    for start in range(0, samples.shape[0], CHUNK_SIZE):
        chunk = samples[start : start + CHUNK_SIZE]
        series[start : start + CHUNK_SIZE] = f(chunk) + cv_fit.control_values(p, basis, chunk)
    return series


def cv_estimate(chain: ChainOutput, p: Potential, basis: ControlBasis, cv_fit: CvFit, f: TestFunction) -> float:
    """
    the control variate estimator (1/n) sum f(X_k) + L g_theta(X_k)
    """
    series = corrected_series(chain, p, basis, cv_fit, f)
    estimate = math.fsum(series) / series.shape[0]
    return estimate


def plain_estimate(chain: ChainOutput, f: TestFunction) -> float:
    samples = chain.samples
    if samples.shape[0] == 0:
        raise DataError("chain has no samples")
    values = np.asarray(f(samples), dtype=float).reshape(samples.shape[0])
    estimate = math.fsum(values) / values.shape[0]
    return estimate
