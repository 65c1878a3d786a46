#!/usr/bin/env python3
"""
tfoc - Quantization Test Suite
t-quantized kernels, the exchange formula and the kernel/symbol norm ratios
"""

import math
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '.'))

from tfoc.core.errors import ValidationError
from tfoc.models import Signal, Symbol2D
from tfoc.services.corpus import bandlimited_symbol, gaussian_signal, symbol_corpus
from tfoc.services.grid import make_grid, unitary_fft, unitary_ifft
from tfoc.services.quantize import (apply_operator, coefficient_of_variation, exchange, kernel_from_symbol,
                                    pseudomod_ratio_experiment)
from tfoc.services.weights import parse_weight


class TestQuantization(unittest.TestCase):
    """Kernels of t-quantized symbols"""

    def setUp(self):
        self.grid = make_grid(32)
        self.rng = np.random.default_rng(21)
        self.f = gaussian_signal(self.grid, width=0.9, center=0.5, modulation=-1.0)

    def test_01_identity_symbol(self):
        """a = 1 quantizes to the identity for every t"""
        one = Symbol2D(np.ones((32, 32)), self.grid)
        for t in (0.0, 0.5, 1.0):
            image = apply_operator(kernel_from_symbol(one, t), self.f)
            np.testing.assert_allclose(image.values, self.f.values, atol=1e-10)

    def test_02_multiplication_symbol(self):
        """a(x, xi) = b(x) at t = 0 multiplies by b"""
        b = self.rng.standard_normal(32)
        a = Symbol2D(np.repeat(b[:, None], 32, axis=1), self.grid)
        image = apply_operator(kernel_from_symbol(a, 0.0), self.f)
        np.testing.assert_allclose(image.values, b * self.f.values, atol=1e-10)

    def test_03_fourier_multiplier(self):
        """a(x, xi) = m(xi) is a Fourier multiplier for every t"""
        m = np.exp(-self.grid.xi_nodes ** 2)
        a = Symbol2D(np.repeat(m[None, :], 32, axis=0), self.grid)
        expected = unitary_ifft(m * unitary_fft(self.f.values))
        for t in (0.0, 0.5):
            image = apply_operator(kernel_from_symbol(a, t), self.f)
            np.testing.assert_allclose(image.values, expected, atol=1e-10)

    def test_04_exchange_identity(self):
        """exchange(a, s, s) returns an equal copy"""
        a = bandlimited_symbol(self.grid, self.rng)
        b = exchange(a, 0.3, 0.3)
        np.testing.assert_array_equal(a.values, b.values)
        self.assertIsNot(a.values, b.values)

    def test_05_exchange_formula(self):
        """a_s(x, D) = b_t(x, D) for b = exchange(a, s, t)"""
        a = bandlimited_symbol(self.grid, self.rng)
        for s, t in ((0.0, 0.5), (1.0, 0.0), (0.25, 0.75)):
            left = kernel_from_symbol(a, s).entries
            right = kernel_from_symbol(exchange(a, s, t), t).entries
            np.testing.assert_allclose(right, left, atol=1e-10 * np.max(np.abs(left)))

    def test_06_exchange_roundtrip(self):
        """Exchanging s -> t -> s recovers the symbol"""
        a = bandlimited_symbol(self.grid, self.rng)
        back = exchange(exchange(a, 0.0, 1.0), 1.0, 0.0)
        np.testing.assert_allclose(back.values, a.values, atol=1e-10)

    def test_07_grid_mismatch(self):
        """Operators and signals must share a grid"""
        kernel = kernel_from_symbol(Symbol2D(np.ones((16, 16)), make_grid(16)), 0.0)
        with self.assertRaises(ValidationError):
            apply_operator(kernel, self.f)

    def test_08_frequency_symbol_is_derivative(self):
        """a(x, xi) = xi quantizes to -i d/dx on band-limited signals for every t"""
        coeffs = np.zeros(32, dtype=complex)
        active = np.abs(self.grid.indices) < 8
        coeffs[active] = self.rng.standard_normal(active.sum()) + 1j * self.rng.standard_normal(active.sum())
        f = Signal(unitary_ifft(coeffs), self.grid)
        expected = unitary_ifft(self.grid.xi_nodes * coeffs)
        a = Symbol2D(np.repeat(self.grid.xi_nodes[None, :], 32, axis=0), self.grid)
        for t in (0.0, 0.5, 1.0):
            image = apply_operator(kernel_from_symbol(a, t), f)
            self.assertLess(np.max(np.abs(image.values - expected)), 1e-8, t)

    def test_09_hilbert_schmidt_bridge(self):
        """h |K|_F / (h |a|_F) = 1 / sqrt(2 pi) for band-limited symbols"""
        a = bandlimited_symbol(self.grid, self.rng)
        for t in (0.0, 0.5, 1.0):
            kernel = kernel_from_symbol(a, t)
            ratio = np.linalg.norm(kernel.entries) / np.linalg.norm(a.values)
            self.assertAlmostEqual(ratio, 1.0 / math.sqrt(2 * math.pi), delta=1e-10)

    def test_10_linear_in_symbol(self):
        a = bandlimited_symbol(self.grid, self.rng)
        b = bandlimited_symbol(self.grid, self.rng)
        alpha, beta = 0.7 - 1.2j, -2.5
        combined = kernel_from_symbol(a.with_values(alpha * a.values + beta * b.values), 0.3).entries
        expected = alpha * kernel_from_symbol(a, 0.3).entries + beta * kernel_from_symbol(b, 0.3).entries
        np.testing.assert_allclose(combined, expected, atol=1e-10 * np.max(np.abs(expected)))

    def test_11_exchange_over_corpus(self):
        """The exchange formula holds for ten band-limited symbols at N = 64"""
        grid = make_grid(64)
        rng = np.random.default_rng(64)
        for _ in range(10):
            a = bandlimited_symbol(grid, rng)
            for s, t in ((0.0, 1.0), (0.0, 0.5), (0.25, 0.75)):
                left = kernel_from_symbol(a, s).entries
                right = kernel_from_symbol(exchange(a, s, t), t).entries
                self.assertLess(np.linalg.norm(right - left) / np.linalg.norm(left), 1e-8, (s, t))


class TestPseudomodRatios(unittest.TestCase):
    """Kernel/symbol modulation-norm ratios"""

    def setUp(self):
        self.grid = make_grid(16)
        self.corpus = symbol_corpus(self.grid, size=4, seed=5)

    def test_01_coefficient_of_variation(self):
        self.assertEqual(coefficient_of_variation([2.0, 2.0, 2.0]), 0.0)
        self.assertAlmostEqual(coefficient_of_variation([1.0, 3.0]), 0.5)

    def test_02_l2_ratio_constant_for_any_t(self):
        """With omega = 1 and p = 2 the ratio does not depend on the symbol"""
        for t in (0.0, 0.5):
            report = pseudomod_ratio_experiment(self.corpus, t, 2)
            self.assertLess(report.cv, 1e-8)
            self.assertTrue(report.passed)
            self.assertEqual(len(report.ratios), 4)

    def test_03_matched_window_at_t0(self):
        """At t = 0 the matched window makes every p exact"""
        report = pseudomod_ratio_experiment(self.corpus, 0.0, 1, workers=2)
        self.assertLess(report.cv, 1e-8)
        self.assertEqual(report.to_dict()["window"], "matched")

    def test_04_invalid_inputs(self):
        """Empty corpora, unknown windows and wrong weight arities are rejected"""
        with self.assertRaises(ValidationError):
            pseudomod_ratio_experiment([], 0.0, 2)
        with self.assertRaises(ValidationError):
            pseudomod_ratio_experiment(self.corpus, 0.0, 2, kernel_window="hann")
        with self.assertRaises(ValidationError):
            pseudomod_ratio_experiment(self.corpus, 0.0, 2, omega=parse_weight("one", 2))

    def test_05_report_fields(self):
        """Reports carry the weight descriptors"""
        omega = parse_weight("bracket_power(1)@2,3", 4)
        report = pseudomod_ratio_experiment(self.corpus, 0.5, 2, omega=omega, kernel_window="gaussian")
        data = report.to_dict()
        self.assertEqual(data["weight"], "bracket_power(1)@2,3")
        self.assertTrue(data["kernel_weight"].startswith("kernel_t("))
        self.assertEqual(data["window"], "gaussian")
        self.assertTrue(all(r > 0 for r in data["ratios"]))


if __name__ == '__main__':
    unittest.main()
