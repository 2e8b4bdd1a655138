"""
Created on 2026-10-18

@author: wf
"""

import numpy as np
from basemkit.basetest import Basetest

from langevincv.bases import (
    BasisKind,
    basis_from_spec,
    cross_index,
    cross_pairs,
    first_order_basis,
    gaussian_kernel_basis_1d,
    generator_apply,
    kernel_centers,
    second_order_basis,
)
from langevincv.errors import ParameterError, ShapeError
from langevincv.potentials import gaussian_potential, mixture1d_potential


class TestBases(Basetest):
    """
    test the control function families
    """

    def setUp(self, debug=False, profile=True):
        Basetest.setUp(self, debug=debug, profile=profile)
        self.rng = np.random.default_rng(2026)

    def check_derivatives(self, basis, x: np.ndarray, step: float = 1e-4):
        """
        compare gradients and Laplacians with central differences
        """
        dim = basis.dim
        values = basis.evaluate(x)
        grads = basis.gradient(x)
        laps = basis.laplacian(x)
        fd_grad = np.zeros_like(grads)
        fd_lap = np.zeros_like(laps)
        for d in range(dim):
            e = np.zeros(dim)
            e[d] = step
            plus, minus = basis.evaluate(x + e), basis.evaluate(x - e)
            fd_grad[:, d] = (plus - minus) / (2 * step)
            fd_lap += (plus - 2 * values + minus) / step**2
        scale = np.maximum(np.abs(fd_grad), 1.0)
        self.assertLess(np.max(np.abs(grads - fd_grad) / scale), 1e-5)
        self.assertLess(np.max(np.abs(laps - fd_lap) / np.maximum(np.abs(fd_lap), 1.0)), 1e-4)

    def test_first_order(self):
        basis = first_order_basis(3)
        self.assertEqual(3, basis.count)
        x = np.array([1.0, 5.0, 7.0])
        self.assertEqual(5.0, basis.psi(1, x))
        self.assertEqual(0.0, basis.lap_psi(0, x))
        np.testing.assert_array_equal([1.0, 0.0, 0.0], basis.grad_psi(0, x))
        with self.assertRaises(ParameterError):
            first_order_basis(0)

    def test_cross_index(self):
        self.assertEqual(7, cross_index(2, 1, 3))
        self.assertEqual(8, cross_index(3, 1, 3))
        self.assertEqual(9, cross_index(3, 2, 3))
        for dim in range(1, 8):
            indices = sorted(cross_index(i, j, dim) for i, j in cross_pairs(dim))
            self.assertEqual(list(range(2 * dim + 1, dim * (dim + 3) // 2 + 1)), indices)

    def test_second_order(self):
        basis = second_order_basis(4)
        self.assertEqual(14, basis.count)
        self.assertEqual(BasisKind.SECOND_ORDER, basis.kind)
        x = np.array([1.0, 2.0, 3.0])
        b3 = second_order_basis(3)
        values = b3.evaluate(x)
        # x, x^2, then x2 x1, x3 x1, x3 x2
        np.testing.assert_array_equal([1, 2, 3, 1, 4, 9, 2, 3, 6], values)
        b2 = second_order_basis(2)
        self.assertEqual(2.0, b2.lap_psi(3, np.array([0.3, -0.7])))
        for basis in (b2, b3, basis):
            self.check_derivatives(basis, self.rng.normal(size=basis.dim))

    def test_gaussian_kernels(self):
        np.testing.assert_array_equal([-4.0, 4.0], kernel_centers(2, -4, 4))
        self.assertEqual(0.5, kernel_centers(1, -1, 2)[0])
        basis = gaussian_kernel_basis_1d(4, -4, 4)
        for i, mu in enumerate(basis.centers):
            self.assertAlmostEqual(0.3989423, float(basis.psi(i, np.array([mu]))), places=7)
            self.assertEqual(0.0, float(basis.grad_psi(i, np.array([mu]))[0]))
        for x in (-3.1, 0.2, 1.7):
            self.check_derivatives(basis, np.array([x]))
        with self.assertRaises(ParameterError):
            gaussian_kernel_basis_1d(4, 1, 1)

    def test_linear_independence(self):
        """
        Gram matrix of the values on a random point cloud is nonsingular
        """
        for basis, dim in ((second_order_basis(3), 3), (gaussian_kernel_basis_1d(6, -4, 4), 1)):
            cloud = self.rng.normal(scale=2.0, size=(200, dim))
            values = basis.evaluate(cloud)
            self.assertEqual(basis.count, np.linalg.matrix_rank(values.T @ values))

    def test_generator_apply(self):
        p = gaussian_potential(1, 1.0)
        basis = first_order_basis(1)
        self.assertAlmostEqual(-2.0, float(generator_apply(p, basis, np.array([1.0]), np.array([2.0]))))
        self.assertEqual(0.0, float(generator_apply(p, basis, np.zeros(1), np.array([2.0]))))
        with self.assertRaises(ShapeError):
            generator_apply(p, basis, np.zeros(2), np.array([2.0]))

    def test_generator_finite_difference(self):
        """
        L g on the mixture matches -U' g' + g'' by finite differences
        """
        p = mixture1d_potential()
        basis = gaussian_kernel_basis_1d(4, -4, 4)
        theta = self.rng.normal(size=4)
        x, h = 0.3, 1e-4

        def g(t):
            return float(basis.evaluate(np.array([t])) @ theta)

        gp = (g(x + h) - g(x - h)) / (2 * h)
        gpp = (g(x + h) - 2 * g(x) + g(x - h)) / h**2
        expected = -float(p.gradient(np.array([x]))[0]) * gp + gpp
        self.assertAlmostEqual(expected, float(generator_apply(p, basis, theta, np.array([x]))), delta=1e-5)

    def test_linearity_and_constant(self):
        p = mixture1d_potential()
        basis = gaussian_kernel_basis_1d(5, -4, 4).with_constant()
        xs = np.linspace(-3, 3, 11)[:, np.newaxis]
        t1, t2 = self.rng.normal(size=6), self.rng.normal(size=6)
        lhs = generator_apply(p, basis, t1 + t2, xs)
        rhs = generator_apply(p, basis, t1, xs) + generator_apply(p, basis, t2, xs)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)
        np.testing.assert_array_equal(np.zeros(11), basis.generator_values(p, xs)[:, -1])
        self.assertTrue(basis.label.endswith("+1"))

    def test_basis_from_spec(self):
        self.assertEqual(BasisKind.FIRST_ORDER, basis_from_spec("first", 3).kind)
        self.assertEqual(9, basis_from_spec("second", 3).count)
        for spec in ("gaussian_kernels(4,-4,4)", "gaussian_kernels:4:-4:4"):
            basis = basis_from_spec(spec, 1)
            np.testing.assert_allclose([-4.0, -4.0 / 3, 4.0 / 3, 4.0], basis.centers, rtol=1e-14)
        for bad in ("third", "gaussian_kernels(4,-4)"):
            with self.assertRaises(ParameterError):
                basis_from_spec(bad, 1)
        with self.assertRaises(ParameterError):
            basis_from_spec("gaussian_kernels(4,-4,4)", 2)
