"""
Created on 2026-10-18

Spectral estimation of the asymptotic variance with a Tukey-Hanning lag window.

@author: wf
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from langevincv.errors import ParameterError

logger = logging.getLogger(__name__)


@dataclass
class SpectralEstimate:
    """
    Attributes:
        sigma2: the windowed sum of autocovariances, reported raw even when negative
        n: series length
        max_lag: floor(sqrt(n)) - 1
        autocov: autocovariances at lags 0..max_lag
        negative: True if sigma2 < 0
    """

    sigma2: float
    n: int
    max_lag: int
    autocov: np.ndarray = field(repr=False)
    negative: bool = False


def autocovariance(series: np.ndarray, max_lag: int) -> np.ndarray:
    """
    omega(k) = (1/n) sum_{s=0}^{n-1-k} (h_s - mean)(h_{s+k} - mean) for k = 0..max_lag

    the divisor is n at every lag
    """
    h = np.asarray(series, dtype=float).ravel()
    n = h.shape[0]
    if max_lag < 0 or max_lag >= n:
        raise ParameterError(f"max_lag must be in 0..{n - 1} but is {max_lag}")
    if np.ptp(h) == 0:
        # constant series, the mean may not be representable
        d = np.zeros(n)
    else:
        d = h - np.mean(h)
    omega = np.empty(max_lag + 1)
    for k in range(max_lag + 1):
        omega[k] = np.dot(d[: n - k], d[k:]) / n
    return omega


def tukey_hanning_weights(bandwidth: int) -> np.ndarray:
    """
    w(k) = 1/2 + cos(pi k / bandwidth)/2 for k = 0..bandwidth-1
    """
    k = np.arange(bandwidth)
    return 0.5 + 0.5 * np.cos(np.pi * k / bandwidth)


def spectral_variance(series: np.ndarray) -> SpectralEstimate:
    """
    sigma2 = w(0) omega(0) + 2 sum_{k=1}^{floor(sqrt(n))-1} w(k) omega(k)
    """
    h = np.asarray(series, dtype=float).ravel()
    n = h.shape[0]
    if n < 4:
        raise ParameterError(f"spectral variance needs at least 4 values but got {n}")
    bandwidth = int(np.floor(np.sqrt(n)))
    # floating point sqrt may be off by one for perfect squares
    while bandwidth * bandwidth > n:
        bandwidth -= 1
    while (bandwidth + 1) * (bandwidth + 1) <= n:
        bandwidth += 1
    max_lag = bandwidth - 1
    omega = autocovariance(h, max_lag)
    w = tukey_hanning_weights(bandwidth)
    sigma2 = float(w[0] * omega[0] + 2.0 * np.dot(w[1:], omega[1:]))
    negative = sigma2 < 0
    if negative:
        logger.warning(f"negative spectral variance estimate {sigma2:.3e} for n={n}")
    estimate = SpectralEstimate(sigma2=sigma2, n=n, max_lag=max_lag, autocov=omega, negative=negative)
    return estimate
