"""
Created on 2026-10-18

Markov kernels (ULA, MALA, RWM) and seeded chain runners.

@author: wf
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.integrate import simpson

from langevincv.errors import DivergenceError, NumericError, ParameterError, ShapeError
from langevincv.potentials import Potential

logger = logging.getLogger(__name__)

UINT64_MASK = (1 << 64) - 1
# number of noise draws generated per refill of the chain's buffer
NOISE_BLOCK = 8192


class Algorithm(Enum):
    """
    the discretizations of the overdamped Langevin diffusion
    """

    ULA = "ULA"
    MALA = "MALA"
    RWM = "RWM"

    @classmethod
    def of_name(cls, name: str) -> "Algorithm":
        for algorithm in cls:
            if algorithm.value == name.upper():
                return algorithm
        raise ParameterError(f"unknown algorithm '{name}', expected one of {[a.value for a in cls]}")

    @property
    def metropolized(self) -> bool:
        return self != Algorithm.ULA


@dataclass(frozen=True)
class KernelSpec:
    """
    a Markov kernel R_gamma

    Attributes:
        algorithm: ULA, MALA or RWM
        gamma: step size; RWM proposes with variance 2 gamma
    """

    algorithm: Algorithm
    gamma: float

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ParameterError(f"step size gamma must be positive but is {self.gamma}")

    def __str__(self):
        return f"{self.algorithm.value}(gamma={self.gamma:g})"


@dataclass
class ChainOutput:
    """
    the post burn-in states of a chain

    Attributes:
        samples: length x dim matrix of the states X_N..X_{N+n-1}
        accepted: accepted proposals over all burn_in + length steps
        seed: the seed the chain was run with
        spec: the kernel
        burn_in: number of discarded steps N
        length: number of retained states n
        x0: start point
        replica: replica index when run as part of a batch
    """

    samples: np.ndarray
    accepted: int
    seed: int
    spec: KernelSpec
    burn_in: int
    length: int
    x0: np.ndarray
    replica: Optional[int] = None
    elapsed: float = field(default=0.0, compare=False)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def steps(self) -> int:
        return self.burn_in + self.length

    def same_as(self, other: "ChainOutput") -> bool:
        """
        bitwise equality of the trajectories and bookkeeping
        """
        same = (
            self.seed == other.seed
            and self.spec == other.spec
            and self.accepted == other.accepted
            and self.burn_in == other.burn_in
            and self.length == other.length
            and np.array_equal(self.x0, other.x0)
            and np.array_equal(self.samples, other.samples)
        )
        return same


def acceptance_rate(chain: ChainOutput) -> float:
    rate = chain.accepted / chain.steps
    return rate


def _gradient(p: Potential, x: np.ndarray) -> np.ndarray:
    grad = p.grad_u(x)
    if np.isnan(grad).any():
        raise NumericError(f"{p.label}: NaN gradient", x=x)
    return grad


def ula_step(p: Potential, gamma: float, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """
    x - gamma grad U(x) + sqrt(2 gamma) z
    """
    y = x - gamma * _gradient(p, x) + np.sqrt(2.0 * gamma) * z
    return y


def mala_log_tau(p: Potential, gamma: float, x: np.ndarray, z: np.ndarray) -> float:
    """
    the MALA rejection exponent tau; the proposal is accepted with probability min(1, exp(-tau))

    tau = U(y) - U(x) + (|z - sqrt(gamma/2)(grad U(x) + grad U(y))|^2 - |z|^2)/2
    with y = x - gamma grad U(x) + sqrt(2 gamma) z
    """
    tau, _y = _mala_proposal(p, gamma, x, z)
    return tau


def _mala_proposal(p: Potential, gamma: float, x: np.ndarray, z: np.ndarray) -> Tuple[float, np.ndarray]:
    grad_x = _gradient(p, x)
    y = x - gamma * grad_x + np.sqrt(2.0 * gamma) * z
    grad_y = p.grad_u(y)
    w = z - np.sqrt(gamma / 2.0) * (grad_x + grad_y)
    tau = float(p.u(y) - p.u(x) + 0.5 * (np.dot(w, w) - np.dot(z, z)))
    return tau, y


def _accept(tau: float, u: float) -> bool:
    # u < min(1, e^-tau) without overflow for very negative tau
    accepted = tau <= 0.0 or u < np.exp(-tau)
    return bool(accepted)


def mala_step(p: Potential, gamma: float, x: np.ndarray, z: np.ndarray, u: float) -> Tuple[np.ndarray, bool]:
    tau, y = _mala_proposal(p, gamma, x, z)
    if _accept(tau, u):
        return y, True
    return x, False


def rwm_step(p: Potential, gamma: float, x: np.ndarray, z: np.ndarray, u: float) -> Tuple[np.ndarray, bool]:
    """
    random walk proposal x + sqrt(2 gamma) z accepted with probability min(1, exp(-(U(y) - U(x))))
    """
    y = x + np.sqrt(2.0 * gamma) * z
    tau = float(p.u(y) - p.u(x))
    if _accept(tau, u):
        return y, True
    return x, False


def run_chain(
    p: Potential,
    spec: KernelSpec,
    x0: np.ndarray,
    burn_in: int,
    length: int,
    seed: int,
) -> ChainOutput:
    """
    run burn_in + length kernel applications from x0 and keep the last length states

    The noise is drawn from a PCG64 generator seeded with seed in fixed size blocks,
    so the trajectory depends on (seed, spec, x0, burn_in, length) only.

    Raises:
        DivergenceError: when a state becomes non finite
    """
    if length < 1:
        raise ParameterError(f"chain length must be at least 1 but is {length}")
    if burn_in < 0:
        raise ParameterError(f"burn-in must be non negative but is {burn_in}")
    x = p.check_point(np.array(x0, dtype=float, copy=True)).reshape(p.dim)
    if not np.isfinite(x).all():
        raise ParameterError(f"start point {x} is not finite")
    start = x.copy()
    rng = np.random.Generator(np.random.PCG64(seed & UINT64_MASK))
    gamma = spec.gamma
    samples = np.empty((length, p.dim))
    accepted = 0
    total = burn_in + length
    start_time = time.time()
    for block_start in range(0, total, NOISE_BLOCK):
        block = min(NOISE_BLOCK, total - block_start)
        zs = rng.standard_normal((block, p.dim))
        us = rng.random(block)
        for b in range(block):
            step = block_start + b
            try:
                if spec.algorithm == Algorithm.ULA:
                    y = ula_step(p, gamma, x, zs[b])
                    ok = True
                elif spec.algorithm == Algorithm.MALA:
                    y, ok = mala_step(p, gamma, x, zs[b], us[b])
                else:
                    y, ok = rwm_step(p, gamma, x, zs[b], us[b])
            except NumericError as e:
                raise DivergenceError(str(e), step=step, x=x)
            if not np.isfinite(y).all():
                raise DivergenceError(f"{spec} produced a non finite state", step=step, x=x)
            x = y
            accepted += ok
            if step >= burn_in:
                samples[step - burn_in] = x
    elapsed = time.time() - start_time
    chain = ChainOutput(
        samples=samples,
        accepted=accepted,
        seed=seed,
        spec=spec,
        burn_in=burn_in,
        length=length,
        x0=start,
        elapsed=elapsed,
    )
    rate = acceptance_rate(chain)
    logger.info(f"{p.label} {spec} N={burn_in} n={length} seed={seed}: acceptance {rate:.3f} in {elapsed:.1f}s")
    if spec.algorithm.metropolized and rate < 0.05:
        logger.warning(f"{spec}: low acceptance rate {rate:.3f}")
    return chain


def splitmix64(value: int) -> int:
    """
    one round of the splitmix64 output function
    """
    z = (value + 0x9E3779B97F4A7C15) & UINT64_MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & UINT64_MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & UINT64_MASK
    return z ^ (z >> 31)


def replica_seed(base_seed: int, replica: int) -> int:
    seed = (base_seed ^ splitmix64(replica)) & UINT64_MASK
    return seed


def run_replicas(
    p: Potential,
    spec: KernelSpec,
    x0: np.ndarray,
    burn_in: int,
    length: int,
    base_seed: int,
    replicas: int,
    workers: Optional[int] = None,
) -> List[ChainOutput]:
    """
    run independent chains, replica r seeded with base_seed xor splitmix64(r)

    Args:
        workers: number of threads, 1 for sequential execution, None for the executor default;
            threads only overlap where numpy releases the GIL, Experiment uses processes

    Returns:
        List[ChainOutput]: ordered by replica index, independent of scheduling
    """
    if replicas < 1:
        raise ParameterError(f"number of replicas must be at least 1 but is {replicas}")

    def run(replica: int) -> ChainOutput:
        try:
            chain = run_chain(p, spec, x0, burn_in, length, replica_seed(base_seed, replica))
        except DivergenceError as e:
            raise e.for_replica(replica)
        chain.replica = replica
        return chain

    if workers == 1 or replicas == 1:
        chains = [run(r) for r in range(replicas)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            chains = list(executor.map(run, range(replicas)))
    return chains


def _proposal_grid(half_width: float, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    if nodes < 3 or nodes % 2 == 0:
        raise ParameterError(f"quadrature needs an odd node count >= 3 but got {nodes}")
    z = np.linspace(-half_width, half_width, nodes)
    density = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    return z, density


def _metropolis_pullback(
    p: Potential,
    f: Callable[[np.ndarray], np.ndarray],
    x: float,
    proposals: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]],
    method: str,
    nodes: int,
    half_width: float,
    samples: int,
    seed: int,
) -> float:
    if p.dim != 1:
        raise ShapeError("pullbacks are evaluated for one dimensional targets only")
    fx = float(np.asarray(f(np.array([x]))).ravel()[0])
    if method == "quadrature":
        z, density = _proposal_grid(half_width, nodes)
        y, alpha = proposals(z)
        increment = simpson(density * alpha * (f(y[:, np.newaxis]).ravel() - fx), x=z)
    elif method == "montecarlo":
        rng = np.random.Generator(np.random.PCG64(seed))
        z = rng.standard_normal(samples // 2)
        z = np.concatenate([z, -z])
        y, alpha = proposals(z)
        increment = float(np.mean(alpha * (f(y[:, np.newaxis]).ravel() - fx)))
    else:
        raise ParameterError(f"unknown pullback method '{method}'")
    return fx + float(increment)


def rwm_pullback(
    p: Potential,
    gamma: float,
    f: Callable[[np.ndarray], np.ndarray],
    x: float,
    method: str = "quadrature",
    nodes: int = 200001,
    half_width: float = 12.0,
    samples: int = 10_000_000,
    seed: int = 0,
) -> float:
    """
    one step expectation R_gamma f(x) = f(x) + E[min(1, e^-tau)(f(Y) - f(x))]
    of the random walk Metropolis kernel on a one dimensional target

    Args:
        method: 'quadrature' for composite Simpson over the proposal noise on
            [-half_width, half_width], 'montecarlo' for antithetic sampling
    """
    s = np.sqrt(2.0 * gamma)
    ux = float(p.u(np.array([x])))

    def proposals(z):
        y = x + s * z
        tau = p.u(y[:, np.newaxis]) - ux
        return y, np.exp(-np.maximum(tau, 0.0))

    return _metropolis_pullback(p, f, x, proposals, method, nodes, half_width, samples, seed)


def mala_pullback(
    p: Potential,
    gamma: float,
    f: Callable[[np.ndarray], np.ndarray],
    x: float,
    method: str = "quadrature",
    nodes: int = 200001,
    half_width: float = 12.0,
    samples: int = 10_000_000,
    seed: int = 0,
) -> float:
    """
    one step expectation of the MALA kernel on a one dimensional target
    """
    xv = np.array([x], dtype=float)
    ux = float(p.u(xv))
    gx = float(p.grad_u(xv)[0])
    s = np.sqrt(2.0 * gamma)

    def proposals(z):
        y = x - gamma * gx + s * z
        yv = y[:, np.newaxis]
        w = z - np.sqrt(gamma / 2.0) * (gx + p.grad_u(yv)[:, 0])
        tau = p.u(yv) - ux + 0.5 * (w * w - z * z)
        return y, np.exp(-np.maximum(tau, 0.0))

    return _metropolis_pullback(p, f, x, proposals, method, nodes, half_width, samples, seed)
