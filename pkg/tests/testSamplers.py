"""
Created on 2026-10-18

@author: wf
"""

import os
import unittest

import numpy as np
from basemkit.basetest import Basetest

from langevincv.errors import DivergenceError, ParameterError
from langevincv.potentials import Potential, gaussian_potential, mixture1d_potential
from langevincv.samplers import (
    Algorithm,
    KernelSpec,
    acceptance_rate,
    mala_log_tau,
    mala_pullback,
    mala_step,
    replica_seed,
    run_chain,
    run_replicas,
    rwm_pullback,
    rwm_step,
    splitmix64,
    ula_step,
)
from langevincv.testfunctions import mixture_observable
from langevincv.oracle1d import generator_order


def flat_potential(dim: int = 1) -> Potential:
    """
    constant potential
    """
    return Potential(
        dim=dim,
        u=lambda x: np.zeros(np.shape(x)[:-1]),
        grad_u=lambda x: np.zeros(np.shape(x)),
        label="flat",
    )


class TestSamplers(Basetest):
    """
    test the Markov kernels and chain runners
    """

    def setUp(self, debug=False, profile=True):
        Basetest.setUp(self, debug=debug, profile=profile)
        self.gauss = gaussian_potential(1, 1.0)
        self.rng = np.random.default_rng(7)

    def test_kernel_spec(self):
        with self.assertRaises(ParameterError):
            KernelSpec(Algorithm.ULA, 0.0)
        self.assertEqual(Algorithm.MALA, Algorithm.of_name("mala"))

    def test_ula_step(self):
        z = np.array([0.7])
        np.testing.assert_allclose(np.sqrt(2 * 0.1) * z, ula_step(self.gauss, 0.1, np.zeros(1), z))
        self.assertEqual(1.0, float(ula_step(self.gauss, 0.5, np.array([2.0]), np.zeros(1))[0]))
        p = mixture1d_potential()
        x, z, gamma = np.array([1.0]), np.array([0.3]), 0.01
        # independent evaluation of the drift
        w1 = np.exp(-((1.0 + 1.0) ** 2))
        w2 = np.exp(-((1.0 - 1.0) ** 2))
        grad = (w1 * (1.0 + 1.0) + w2 * (1.0 - 1.0)) / (0.5 * (w1 + w2))
        expected = 1.0 - gamma * grad + np.sqrt(2 * gamma) * 0.3
        self.assertAlmostEqual(expected, float(ula_step(p, gamma, x, z)[0]), places=14)

    def test_mala_tau(self):
        self.assertAlmostEqual(0.125, mala_log_tau(self.gauss, 0.5, np.zeros(1), np.ones(1)), places=14)
        flat = flat_potential()
        self.assertEqual(0.0, mala_log_tau(flat, 0.3, np.zeros(1), np.array([1.3])))
        y, accepted = mala_step(flat, 0.3, np.zeros(1), np.array([1.0]), 0.999)
        self.assertTrue(accepted)
        y, accepted = mala_step(self.gauss, 0.5, np.array([3.0]), np.array([2.5]), 0.0)
        self.assertTrue(accepted)

    def test_mala_detailed_balance(self):
        """
        pi(x) q(x,y) a(x,y) = pi(y) q(y,x) a(y,x) for random moves on a Gaussian target
        """
        lam = np.array([[1.5, 0.3], [0.3, 0.8]])
        p = gaussian_potential(2, lam)
        for _ in range(100):
            gamma = float(self.rng.uniform(0.01, 1.0))
            x = self.rng.normal(size=2)
            z = self.rng.normal(size=2)
            y = x - gamma * p.gradient(x) + np.sqrt(2 * gamma) * z
            # noise of the reverse move
            z_back = (x - y + gamma * p.gradient(y)) / np.sqrt(2 * gamma)
            tau_forward = mala_log_tau(p, gamma, x, z)
            tau_back = mala_log_tau(p, gamma, y, z_back)
            # log pi(x) + log q(x,y) with q in terms of the noise, the Jacobians cancel
            lhs = -float(p.energy(x)) - 0.5 * z @ z + min(0.0, -tau_forward)
            rhs = -float(p.energy(y)) - 0.5 * z_back @ z_back + min(0.0, -tau_back)
            self.assertLess(abs(np.expm1(lhs - rhs)), 1e-8)

    def test_rwm_step(self):
        x = np.zeros(1)
        gamma = 0.5
        # tau = U(1) - U(0) = 0.5
        y, accepted = rwm_step(self.gauss, gamma, x, np.ones(1), np.exp(-0.5) - 1e-9)
        self.assertTrue(accepted)
        self.assertEqual(1.0, float(y[0]))
        y, accepted = rwm_step(self.gauss, gamma, x, np.ones(1), np.exp(-0.5) + 1e-9)
        self.assertFalse(accepted)
        self.assertEqual(0.0, float(y[0]))
        _, downhill = rwm_step(self.gauss, gamma, np.array([2.0]), np.array([-1.0]), 0.9999)
        self.assertTrue(downhill)

    def test_run_chain_determinism(self):
        spec = KernelSpec(Algorithm.MALA, 0.1)
        c1 = run_chain(self.gauss, spec, np.zeros(1), 100, 500, seed=11)
        c2 = run_chain(self.gauss, spec, np.zeros(1), 100, 500, seed=11)
        self.assertTrue(c1.same_as(c2))
        self.assertEqual((500, 1), c1.samples.shape)
        self.assertLessEqual(c1.accepted, 600)
        ula = run_chain(self.gauss, KernelSpec(Algorithm.ULA, 0.1), np.zeros(1), 100, 500, seed=11)
        self.assertEqual(600, ula.accepted)
        self.assertEqual(1.0, acceptance_rate(ula))

    def test_flat_acceptance(self):
        flat = flat_potential()
        chain = run_chain(flat, KernelSpec(Algorithm.RWM, 0.2), np.zeros(1), 0, 200, seed=3)
        self.assertEqual(200, chain.accepted)

    def test_small_step_acceptance(self):
        chain = run_chain(self.gauss, KernelSpec(Algorithm.MALA, 1e-6), np.zeros(1), 0, 10000, seed=5)
        self.assertGreaterEqual(acceptance_rate(chain), 0.999)

    def test_divergence(self):
        """
        ULA with a too large step explodes on a stiff Gaussian
        """
        stiff = gaussian_potential(1, 100.0)
        with self.assertRaises(DivergenceError) as context:
            run_chain(stiff, KernelSpec(Algorithm.ULA, 1.0), np.ones(1), 0, 1000, seed=1)
        self.assertGreater(context.exception.step, 0)
        self.assertTrue(np.isfinite(context.exception.x).all())
        with self.assertRaises(DivergenceError) as context:
            run_replicas(stiff, KernelSpec(Algorithm.ULA, 1.0), np.ones(1), 0, 1000, base_seed=1, replicas=2, workers=1)
        self.assertEqual(0, context.exception.replica)

    def test_splitmix(self):
        # reference outputs of splitmix64 seeded with 0
        self.assertEqual(0xE220A8397B1DCDAF, splitmix64(0))
        self.assertEqual(replica_seed(5, 0), 5 ^ 0xE220A8397B1DCDAF)

    def test_replicas(self):
        spec = KernelSpec(Algorithm.RWM, 0.2)
        single = run_replicas(self.gauss, spec, np.zeros(1), 10, 100, base_seed=9, replicas=1)
        direct = run_chain(self.gauss, spec, np.zeros(1), 10, 100, seed=replica_seed(9, 0))
        self.assertTrue(single[0].same_as(direct))
        parallel = run_replicas(self.gauss, spec, np.zeros(1), 10, 100, base_seed=9, replicas=3, workers=3)
        sequential = run_replicas(self.gauss, spec, np.zeros(1), 10, 100, base_seed=9, replicas=3, workers=1)
        for a, b in zip(parallel, sequential):
            self.assertTrue(a.same_as(b))
        self.assertFalse(np.array_equal(parallel[0].samples, parallel[1].samples))
        self.assertFalse(np.array_equal(parallel[1].samples, parallel[2].samples))
        self.assertEqual([0, 1, 2], [chain.replica for chain in parallel])

    def test_mala_mean(self):
        n = 20000 if not os.getenv("LANGEVINCV_LONG_TESTS") else 100000
        chain = run_chain(self.gauss, KernelSpec(Algorithm.MALA, 0.05), np.zeros(1), 1000, n, seed=17)
        # integrated autocorrelation time is about (2 - gamma)/gamma
        self.assertLess(abs(float(np.mean(chain.samples))), 4 * np.sqrt(40.0 / n))

    def test_rwm_generator_order(self):
        """
        R f - f - gamma L f decays like gamma^(3/2) for random walk Metropolis
        """
        p = mixture1d_potential()
        order = generator_order(rwm_pullback, p, mixture_observable(), 2.0)
        if self.debug:
            print(order)
        self.assertAlmostEqual(1.5, order.slope, delta=0.3)

    def test_pullbacks_flat(self):
        """
        without a potential every proposal is accepted: R f(x) = E f(x + sqrt(2 gamma) Z)
        """
        flat = flat_potential()
        x, gamma = 0.3, 0.05

        def square(y):
            return y[..., 0] ** 2

        for pullback in (rwm_pullback, mala_pullback):
            self.assertAlmostEqual(x * x + 2 * gamma, pullback(flat, gamma, square, x), places=9)
        estimate = rwm_pullback(flat, gamma, square, x, method="montecarlo", samples=2_000_000, seed=1)
        self.assertAlmostEqual(x * x + 2 * gamma, estimate, delta=1e-3)
        with self.assertRaises(ParameterError):
            rwm_pullback(flat, gamma, square, x, method="exact")

    @unittest.skipUnless(os.getenv("LANGEVINCV_LONG_TESTS"), "long stochastic check")
    def test_ula_long_run_variance(self):
        chain = run_chain(self.gauss, KernelSpec(Algorithm.ULA, 1e-3), np.zeros(1), 10000, 4000000, seed=23)
        self.assertAlmostEqual(1.0, float(np.var(chain.samples)), delta=0.05)
