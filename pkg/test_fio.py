#!/usr/bin/env python3
"""
tfoc - Fourier Integral Operator Test Suite
Phases, kernels, the phase-space pairing and amplitude norms
"""

import math
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '.'))

from config import Config
from tfoc.core.errors import ConfigurationError, ValidationError
from tfoc.models import Amplitude3D
from tfoc.services.corpus import bandlimited_symbol, gaussian_signal
from tfoc.services.fio import (AmplitudeSpec, Cutoff, HESSIAN_BLOCKS, PairingWindows, amplitude_from_symbol,
                               amplitude_norms, default_pairing_windows, fio_matrix, hessian_condition,
                               hessian_deviation, kernel_map, linear_phase, linear_plus_sin, parse_phase,
                               quadratic_phase, taylor_split, tf_pairing, zero_phase)
from tfoc.services.grid import inner_product, inner_product_table, make_grid
from tfoc.services.quantize import apply_operator, kernel_from_symbol


class TestPhases(unittest.TestCase):
    """Phase families and descriptors"""

    def test_01_parse_descriptors(self):
        self.assertEqual(parse_phase("linear").descriptor, "linear")
        self.assertEqual(parse_phase("linear_plus_sin(0.1)").descriptor, "linear_plus_sin(epsilon=0.1)")
        self.assertEqual(parse_phase("linear_plus_sin(epsilon=0.2)").descriptor, "linear_plus_sin(epsilon=0.2)")
        self.assertEqual(parse_phase({"name": "quadratic", "c": 0.2}).descriptor, "quadratic(c=0.2)")

    def test_02_bad_descriptors(self):
        for descriptor in ("spiral", "linear(1)", "linear_plus_sin", "quadratic(c=x)", "linear_plus_sin(a=1,b=2)"):
            with self.assertRaises(ConfigurationError):
                parse_phase(descriptor)

    def test_03_analytic_derivatives(self):
        """Gradients and Hessians agree with finite differences"""
        for phase in (linear_phase(), linear_plus_sin(0.1), quadratic_phase(0.1), zero_phase()):
            check = phase.self_check(seed=1)
            self.assertTrue(check["pass"], phase.descriptor)
            self.assertTrue(check["real"])

    def test_04_tilde_and_shift(self):
        """tilde is an involution and shifted adds a constant"""
        phase = linear_plus_sin(0.3)
        x, y, z = np.random.default_rng(2).uniform(-3, 3, size=(3, 50))
        np.testing.assert_allclose(phase.tilde().tilde().value(x, y, z), phase.value(x, y, z))
        np.testing.assert_allclose(phase.tilde().value(x, y, z), -phase.value(x, z, y))
        self.assertTrue(phase.tilde().self_check(seed=3)["pass"])
        np.testing.assert_allclose(phase.shifted(2.0).value(x, y, z), phase.value(x, y, z) + 2.0)

    def test_05_hessian_conditions(self):
        """Block determinants against the threshold d"""
        grid = make_grid(16)
        self.assertEqual(set(HESSIAN_BLOCKS), {"full", "x_zeta", "y_zeta", "zeta_zeta"})
        self.assertTrue(hessian_condition(linear_phase(), "y_zeta", grid, d=0.5).passed)
        self.assertTrue(hessian_condition(linear_phase(), "full", grid, d=0.5).passed)
        self.assertFalse(hessian_condition(linear_phase(), "zeta_zeta", grid, d=0.5).passed)
        self.assertFalse(hessian_condition(zero_phase(), "y_zeta", grid).passed)
        report = hessian_condition(linear_plus_sin(0.1), "y_zeta", grid, d=0.5)
        self.assertGreaterEqual(report.min_abs_det, 0.9 - 1e-12)
        with self.assertRaises(ConfigurationError):
            hessian_condition(linear_phase(), "xi_xi", grid)

    def test_06_hessian_deviation(self):
        grid = make_grid(16)
        self.assertEqual(hessian_deviation(linear_phase(), grid), 0.0)
        self.assertLessEqual(hessian_deviation(linear_plus_sin(0.1), grid), 0.2 + 1e-12)

    def test_07_taylor_split(self):
        """Inside the plateau the split reproduces the phase"""
        grid = make_grid(32)
        cutoff = Cutoff.for_cell(grid, Config.CELL_RADIUS)
        split = taylor_split(linear_plus_sin(0.2), cutoff, (0.3, -0.4, 0.5))
        offsets = np.random.default_rng(4).uniform(-cutoff.plateau, cutoff.plateau, size=(20, 3))
        np.testing.assert_allclose(split.residual(offsets), 0.0, atol=1e-12)
        self.assertAlmostEqual(float(cutoff(np.array([cutoff.radius * 1.01, 0.0, 0.0]))), 0.0)
        with self.assertRaises(ValidationError):
            Cutoff(1.0, 0.5)

    def test_08_taylor_split_error_order(self):
        """With two quadrature nodes the split error shrinks like the sixth power of the cell size"""
        phase = linear_plus_sin(0.3)
        unit = np.random.default_rng(9).uniform(-1.0, 1.0, size=(30, 3))
        errors = []
        for cutoff in (Cutoff(0.5, 1.0), Cutoff(0.25, 0.5)):
            split = taylor_split(phase, cutoff, (0.3, 0.7, -0.4), n_points=2)
            errors.append(np.max(np.abs(split.residual(unit * cutoff.plateau))))
        self.assertGreater(errors[0], 0.0)
        self.assertLess(errors[1], errors[0] / 8)


class TestKernels(unittest.TestCase):
    """FIO kernels and their links to quantization and Schatten classes"""

    def setUp(self):
        self.grid = make_grid(16)
        self.rng = np.random.default_rng(7)

    def test_01_linear_phase_is_t0_quantization(self):
        """fio_matrix with phi = (x - y) zeta is the t = 0 kernel"""
        b = bandlimited_symbol(self.grid, self.rng)
        kernel = fio_matrix(amplitude_from_symbol(b), linear_phase())
        np.testing.assert_allclose(kernel.entries, kernel_from_symbol(b, 0.0).entries, atol=1e-10)

    def test_02_kernel_map_scaling(self):
        """K_{a,phi} = 2 pi times the FIO kernel of the same symbol"""
        b = bandlimited_symbol(self.grid, self.rng)
        phase = linear_plus_sin(0.1)
        np.testing.assert_allclose(kernel_map(b, phase).entries,
                                   2 * math.pi * fio_matrix(amplitude_from_symbol(b), phase).entries, atol=1e-10)

    def test_03_amplitude_shape(self):
        with self.assertRaises(ValidationError):
            Amplitude3D(np.zeros((16, 16)), self.grid)

    def test_04_kernel_adjoint_identity(self):
        """(K_{a,phi}, b) = (a, K_{b,phi~}) on N = 32"""
        grid = make_grid(32)
        rng = np.random.default_rng(11)
        phase = linear_plus_sin(0.3)
        for _ in range(3):
            a = bandlimited_symbol(grid, rng)
            b = bandlimited_symbol(grid, rng)
            left = inner_product_table(kernel_map(a, phase).entries, b.values, grid)
            right = inner_product_table(a.values, kernel_map(b, phase.tilde()).entries, grid)
            self.assertLess(abs(left - right), 1e-12 * abs(left))

    def test_05_constant_phase_shift(self):
        """phi + c multiplies the kernel by exp(i c)"""
        a = AmplitudeSpec(width=0.9, spread=1.1, center=(0.2, -0.1, 0.3)).sample(self.grid)
        phase = linear_plus_sin(0.1)
        np.testing.assert_allclose(fio_matrix(a, phase.shifted(0.8)).entries,
                                   np.exp(0.8j) * fio_matrix(a, phase).entries, atol=1e-12)

    def test_06_linear_in_amplitude(self):
        phase = linear_plus_sin(0.3)
        a1 = AmplitudeSpec(width=0.9, spread=1.1, modulation=0.5).sample(self.grid)
        a2 = AmplitudeSpec(width=1.2, spread=0.8, center=(0.5, 0.0, -0.4)).sample(self.grid)
        alpha, beta = 1.5 + 0.5j, -0.75
        combined = fio_matrix(Amplitude3D(alpha * a1.values + beta * a2.values, self.grid), phase).entries
        expected = alpha * fio_matrix(a1, phase).entries + beta * fio_matrix(a2, phase).entries
        np.testing.assert_allclose(combined, expected, atol=1e-12)
        b1 = bandlimited_symbol(self.grid, self.rng)
        b2 = bandlimited_symbol(self.grid, self.rng)
        combined = kernel_map(b1.with_values(alpha * b1.values + beta * b2.values), phase).entries
        expected = alpha * kernel_map(b1, phase).entries + beta * kernel_map(b2, phase).entries
        np.testing.assert_allclose(combined, expected, atol=1e-10 * np.max(np.abs(expected)))

    def test_07_linear_phase_over_corpus(self):
        """For phi = (x - y) zeta the FIO kernel is the t = 0 kernel for ten symbols"""
        rng = np.random.default_rng(16)
        for _ in range(10):
            b = bandlimited_symbol(self.grid, rng)
            expected = kernel_from_symbol(b, 0.0).entries
            kernel = fio_matrix(amplitude_from_symbol(b), linear_phase()).entries
            self.assertLess(np.linalg.norm(kernel - expected) / np.linalg.norm(expected), 1e-10)


class TestPhaseSpacePairing(unittest.TestCase):
    """(Op(a) f, g) through the localized phase-space representation"""

    def setUp(self):
        self.grid = make_grid(32)
        self.a = AmplitudeSpec(width=0.9, spread=1.1, center=(0.2, -0.1, 0.3), modulation=0.5).sample(self.grid)
        self.f = gaussian_signal(self.grid, width=1.0, center=0.4)
        self.g = gaussian_signal(self.grid, width=0.8, center=-0.2, modulation=0.7)

    def _direct(self, phase):
        return inner_product(apply_operator(fio_matrix(self.a, phase), self.f), self.g)

    def test_01_windows(self):
        windows = default_pairing_windows(self.grid)
        h = self.grid.spacing
        self.assertAlmostEqual(h * np.sum(windows.chi0), 1.0)
        self.assertAlmostEqual(h ** 3 * np.sum(windows.chi ** 2), 1.0)
        self.assertGreater(windows.mass(), 0.0)
        with self.assertRaises(ValidationError):
            PairingWindows(windows.chi0 * 2, windows.chi, windows.radius, self.grid)

    def test_02_linear_phase_exact(self):
        """For the linear phase the pairing equals the direct inner product"""
        expected = self._direct(linear_phase())
        value = tf_pairing(self.a, linear_phase(), self.f, self.g, quadrature_points=4)
        self.assertLess(abs(value - expected), 1e-8 * abs(expected))

    def test_03_perturbed_phase(self):
        """For a curved phase the pairing agrees within the configured tolerance"""
        phase = linear_plus_sin(0.1)
        expected = self._direct(phase)
        value = tf_pairing(self.a, phase, self.f, self.g, quadrature_points=8)
        self.assertLess(abs(value - expected), Config.PAIRING_RTOL * abs(expected))

    def test_04_zero_inputs(self):
        zero = self.f.with_values(np.zeros(32))
        self.assertEqual(tf_pairing(self.a, linear_phase(), zero, self.g), 0j)


class TestAmplitudeNorms(unittest.TestCase):
    """Sup/integral norms of amplitudes on the coarse grid"""

    def setUp(self):
        self.grid = make_grid(16)
        self.spec = AmplitudeSpec(width=1.0, spread=0.9, center=(0.0, 0.3, -0.2))

    def test_01_keys_and_positivity(self):
        norms = amplitude_norms(self.spec.sample(self.grid))
        self.assertEqual(set(norms), {"case1", "case2", "case3", "m_inf_1"})
        self.assertTrue(all(v > 0 and math.isfinite(v) for v in norms.values()))

    def test_02_homogeneity(self):
        base = amplitude_norms(self.spec.sample(self.grid))
        doubled = amplitude_norms(self.spec.scaled(-2.0).sample(self.grid))
        for key, value in base.items():
            self.assertAlmostEqual(doubled[key], 2 * value, places=9)

    def test_03_weight_arity(self):
        from tfoc.services.weights import constant_weight
        with self.assertRaises(ValidationError):
            amplitude_norms(self.spec.sample(self.grid), omega=constant_weight(4))


if __name__ == '__main__':
    unittest.main()
