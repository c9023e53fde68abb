import doctest
import math
import unittest

import numpy as np

import spectra.wkb

from spectra.exc import DomainError, InputError
from spectra.numerics import Tolerance
from spectra.potentials import make_decaying, make_periodic
from spectra.wkb import (
    chain,
    kernel,
    kernel_identity_residual,
    phase_monotonicity_check,
    series_check,
    series_solution,
    solve_reduced,
    substitution_check,
    wkb_compare,
    wkb_phase,
)


TIGHT = Tolerance(abs_tol=1e-12, rel_tol=1e-12)


def load_tests(loader, tests, ignore):
    tests.addTests(doctest.DocTestSuite(spectra.wkb))
    return tests


class TestKernel(unittest.TestCase):
    v0 = make_periodic("mathieu:1.0")
    v = make_decaying("power:1,0.9")

    def test_identity(self):
        K = kernel(self.v0, self.v, 2.0, 50.0, TIGHT)
        phase = wkb_phase(self.v0, self.v, 2.0, 50.0, TIGHT, data=K.data)
        residual = kernel_identity_residual(K, phase, np.linspace(0, 50, 101))
        self.assertLessEqual(residual, 1e-8)

    def test_free_phase(self):
        # p = -(1/ω) ∫ V |φ|^2 = -log(1 + x) / 4 at E = 4
        phase = wkb_phase(make_periodic("zero"), make_decaying("power:1,1"), 4.0, 10.0, TIGHT)
        self.assertAlmostEqual(float(phase(3.0)), -math.log(4.0) / 4, delta=1e-10)
        self.assertAlmostEqual(float(phase.derivative(3.0)), -1 / 16, delta=1e-10)

    def test_free_potential_leaves_frame(self):
        v0 = make_periodic("zero")
        K = kernel(v0, make_decaying("zero"), 4.0, 10.0, TIGHT)
        phase = wkb_phase(v0, make_decaying("zero"), 4.0, 10.0, TIGHT, data=K.data)
        xs = np.linspace(0, 10, 11)
        Y = solve_reduced(K, (1.0, 0.0), (0.0, 10.0))(xs)
        np.testing.assert_allclose(Y[0], 1.0)
        np.testing.assert_allclose(Y[1], 0.0)
        u, uprime = chain(phase, xs, Y)
        np.testing.assert_allclose(u, np.exp(2j * xs), atol=1e-9)
        np.testing.assert_allclose(uprime, 2j * np.exp(2j * xs), atol=1e-8)

    def test_substitutions(self):
        v = make_decaying("power:1,1")
        K = kernel(self.v0, v, 2.0, 20.0, TIGHT)
        phase = wkb_phase(self.v0, v, 2.0, 20.0, TIGHT, data=K.data)
        mismatch = substitution_check(K, phase, (1.0, 0.2), (0.0, 10.0), TIGHT)
        self.assertLessEqual(mismatch, 1e-6)
        self.assertRaises(InputError, substitution_check, K, phase, (1.0, 0.0), (5.0, 30.0))
        self.assertRaises(InputError, substitution_check, K, phase, (1.0, 0.0), (5.0, 5.0))

    def test_invalid_range(self):
        self.assertRaises(InputError, kernel, self.v0, self.v, 2.0, 0.0)
        self.assertRaises(DomainError, kernel, self.v0, self.v, math.pi**2, 10.0)


class TestSeries(unittest.TestCase):
    v0 = make_periodic("mathieu:1.0")
    bump = make_decaying("bump:1,0,5")

    def test_matches_reduced_system(self):
        series, distance = series_check(self.v0, self.bump, 2.0, 0.0, 20, TIGHT)
        self.assertLessEqual(distance, 1e-6)
        self.assertTrue(series.converged)
        self.assertEqual(series.partial_sums.shape, (21, 2))
        self.assertLess(series.magnitudes[-1], 1e-10)

    def test_beyond_support(self):
        series, distance = series_check(self.v0, self.bump, 2.0, 6.0, 4)
        self.assertEqual(distance, 0.0)
        np.testing.assert_array_equal(series.terms, np.zeros(4))

    def test_zero_potential(self):
        series = series_solution(self.v0, make_decaying("zero"), 2.0, 0.0, 5)
        np.testing.assert_array_equal(series.value, [1.0, 0.0])

    def test_partial_sums_alternate(self):
        series = series_solution(self.v0, self.bump, 2.0, 1.0, 4)
        terms = series.terms
        np.testing.assert_allclose(series.partial_sums[2], [1 + terms[1], terms[0]])
        expected = [1 + terms[1] + terms[3], terms[0] + terms[2]]
        np.testing.assert_allclose(series.partial_sums[4], expected)

    def test_errors(self):
        self.assertRaises(InputError, series_check, self.v0, make_decaying("power:1,1"), 2.0, 0.0)
        self.assertRaises(InputError, series_solution, self.v0, self.bump, 2.0, 0.0, 0)
        self.assertRaises(InputError, series_solution, self.v0, self.bump, 2.0, -1.0)
        self.assertRaises(
            InputError, series_solution, self.v0, self.bump, 2.0, 3.0, cutoffs=[2.0, 4.0]
        )


class TestWKBComparison(unittest.TestCase):
    def test_exact_beyond_support(self):
        comparison = wkb_compare(
            make_periodic("mathieu:1.0"), make_decaying("bump:1,0,5"), 2.0, 20.0, TIGHT
        )
        beyond = comparison.x > 5
        np.testing.assert_allclose(comparison.r[beyond], 0.0, atol=1e-7)
        self.assertLessEqual(comparison.tail_max, 1e-7)
        self.assertGreater(comparison.r[0], 1e-3)

    def test_decaying_error(self):
        comparison = wkb_compare(
            make_periodic("mathieu:1.0"), make_decaying("power:1,2"), 2.0, 400.0, points=401
        )
        self.assertLess(comparison.tail_max, comparison.r[0])
        self.assertLess(comparison.decay, 0)


class TestPhaseMonotonicity(unittest.TestCase):
    def test_free(self):
        # ∂_E (h(x) - h(y)) = (x - y) / √E when V vanishes
        report = phase_monotonicity_check(
            make_periodic("zero"), make_decaying("zero"), (3.0, 5.0), [(1.0, 0.0), (5.0, 2.0)]
        )
        np.testing.assert_allclose(report.slopes[:, 0], 1 / np.sqrt(report.energies), rtol=1e-5)
        self.assertAlmostEqual(report.lower, 1 / math.sqrt(5), delta=1e-5)
        self.assertAlmostEqual(report.upper[0], 1 / math.sqrt(3), delta=1e-5)

    def test_errors(self):
        v0, v = make_periodic("mathieu:1.0"), make_decaying("power:1,1")
        self.assertRaises(DomainError, phase_monotonicity_check, v0, v, (9.0, 11.0), [(1, 0)])
        self.assertRaises(InputError, phase_monotonicity_check, v0, v, (2.0, 1.0), [(1, 0)])
        self.assertRaises(InputError, phase_monotonicity_check, v0, v, (1.0, 2.0), [(1, 1)])
        self.assertRaises(InputError, phase_monotonicity_check, v0, v, (1.0, 2.0), [])
