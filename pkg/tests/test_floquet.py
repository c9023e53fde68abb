import doctest
import math
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st
from scipy import integrate

import spectra.floquet

from spectra.exc import DomainError, InputError
from spectra.floquet import (
    band_edges,
    capital_gamma,
    discriminant,
    enclosing_band,
    floquet_data,
    gamma_prime_bounds,
    half_band_energy,
    monodromy,
    quasimomentum,
    quasimomentum_slope,
    solve_schrodinger,
)
from spectra.numerics import Tolerance
from spectra.potentials import make_periodic


TIGHT = Tolerance(abs_tol=1e-12, rel_tol=1e-12)


def load_tests(loader, tests, ignore):
    tests.addTests(doctest.DocTestSuite(spectra.floquet))
    return tests


class TestMonodromy(unittest.TestCase):
    @settings(derandomize=True, max_examples=40, deadline=None)
    @given(st.floats(min_value=0.1, max_value=50))
    def test_free_discriminant(self, E):
        value = discriminant(make_periodic("zero"), E, TIGHT)
        self.assertAlmostEqual(value, 2 * math.cos(math.sqrt(E)), delta=1e-8)

    def test_free_below_spectrum(self):
        value = discriminant(make_periodic("zero"), -4.0, TIGHT)
        self.assertAlmostEqual(value, 2 * math.cosh(2.0), delta=1e-8)

    @settings(derandomize=True, max_examples=40, deadline=None)
    @given(
        st.sampled_from(["mathieu:{a}", "square:{a},0.3", "mathieu:{a} + square:1,0.7"]),
        st.floats(min_value=-3, max_value=3),
        st.floats(min_value=-5, max_value=50),
    )
    def test_unimodular(self, template, amplitude, E):
        Q = monodromy(make_periodic(template.format(a=amplitude)), E)
        self.assertAlmostEqual(float(Q.det), 1.0, delta=1e-9)

    def test_complex_energy(self):
        Q = monodromy(make_periodic("mathieu:1"), 2 + 0.5j)
        self.assertTrue(np.iscomplexobj(Q.matrix))
        self.assertAlmostEqual(complex(Q.det), 1.0, delta=1e-9)
        self.assertIsInstance(discriminant(make_periodic("mathieu:1"), 2 + 0.5j), complex)

    def test_non_finite_energy(self):
        self.assertRaises(InputError, monodromy, make_periodic("zero"), math.nan)


class TestBands(unittest.TestCase):
    def test_free(self):
        free = make_periodic("zero")
        self.assertEqual(band_edges(free, (-1.0, 20.0)).bands, ((0.0, 20.0),))
        self.assertEqual(band_edges(free, (-5.0, -1.0)).bands, ())
        self.assertEqual(band_edges(free, (-1.0, 20.0)).gaps(), ())

    def test_mathieu(self):
        v0 = make_periodic("mathieu:1.0")
        structure = band_edges(v0, (-1.0, 20.0), TIGHT)
        self.assertEqual(len(structure), 2)
        (gap,) = structure.gaps()
        self.assertLess(gap[0], math.pi**2)
        self.assertGreater(gap[1], math.pi**2)
        for a, b in structure:
            for edge in (a, b):
                if edge in structure.window:
                    continue
                with self.subTest(edge=edge):
                    self.assertAlmostEqual(abs(discriminant(v0, edge, TIGHT)), 2.0, delta=1e-7)
        self.assertEqual(structure.band_containing(2.0), structure.bands[0])
        self.assertIsNone(structure.band_containing(math.pi**2))

    def test_square_gaps_open(self):
        v0 = make_periodic("square:3,0.3")
        structure = band_edges(v0, (-2.0, 20.0))
        self.assertEqual(len(structure.gaps()), 1)
        for a, b in structure:
            mid = 0.5 * (a + b)
            self.assertLess(abs(discriminant(v0, mid)), 2)

    def test_invalid_window(self):
        self.assertRaises(InputError, band_edges, make_periodic("zero"), (1.0, 1.0))
        self.assertRaises(InputError, band_edges, make_periodic("zero"), (0.0, math.inf))


class TestFloquetData(unittest.TestCase):
    def test_free(self):
        data = floquet_data(make_periodic("zero"), 4.0, TIGHT)
        self.assertAlmostEqual(data.k, 2.0, delta=1e-10)
        self.assertAlmostEqual(data.omega, 4.0, delta=1e-10)
        self.assertAlmostEqual(complex(data.phi(0.7)), np.exp(1.4j), delta=1e-9)
        self.assertAlmostEqual(float(data.gamma(5.3)), 10.6, delta=1e-8)

    def test_outside_bands(self):
        free = make_periodic("zero")
        self.assertRaises(DomainError, floquet_data, free, -1.0)
        self.assertRaises(DomainError, floquet_data, free, math.pi**2)
        self.assertRaises(DomainError, quasimomentum, make_periodic("mathieu:1"), math.pi**2)

    def test_near_band_edges(self):
        v0 = make_periodic("mathieu:1.0")
        structure = band_edges(v0, (-1.0, 20.0))
        a, b = structure.bands[0]
        self.assertAlmostEqual(a, -0.01266, delta=1e-4)
        self.assertAlmostEqual(b, 9.3665, delta=1e-3)
        for E in (a + 1e-7 * (b - a), b - 1e-7 * (b - a)):
            self.assertRaises(DomainError, floquet_data, v0, E)
            self.assertRaises(DomainError, floquet_data, v0, E, bands=structure)
        inside = a + 1e-4 * (b - a)
        self.assertGreater(floquet_data(v0, inside).omega, 0)
        self.assertGreater(floquet_data(v0, inside, bands=structure).omega, 0)
        self.assertRaises(DomainError, floquet_data, v0, inside, edge_margin=1e-3)

    def test_enclosing_band(self):
        v0 = make_periodic("mathieu:1.0")
        structure = band_edges(v0, (-1.0, 100.0))
        for E in (0.5, 5.0, 20.0, 50.0):
            expected = structure.band_containing(E)
            np.testing.assert_allclose(enclosing_band(v0, E), expected, atol=1e-8)
        self.assertIsNone(enclosing_band(v0, -1.0))
        self.assertIsNone(enclosing_band(make_periodic("zero"), -1.0))

    def test_normalization(self):
        data = floquet_data(make_periodic("mathieu:1.0"), 2.0, TIGHT)
        self.assertAlmostEqual(complex(data.phi(0.0)), 1.0, delta=1e-12)
        self.assertGreater(data.omega, 0)
        self.assertAlmostEqual(abs(data.multiplier), 1.0, delta=1e-12)
        phi, phi_prime = data.frame(np.linspace(0, 3, 13))
        wronskian = 2 * np.imag(np.conj(phi) * phi_prime)
        np.testing.assert_allclose(wronskian, data.omega, rtol=1e-8)

    def test_floquet_solution_solves_equation(self):
        v0 = make_periodic("square:2,0.4")
        data = floquet_data(v0, 3.0, TIGHT)
        direct = solve_schrodinger(
            v0,
            3.0,
            (0.0, 4.0),
            np.array(data.frame(0.0), dtype=complex),
            TIGHT,
            breakpoints=v0.breakpoints_in(0.0, 4.0),
        )
        xs = np.linspace(0, 4, 17)
        np.testing.assert_allclose(direct(xs)[0], data.phi(xs), atol=1e-8)

    def test_gamma_matches_argument(self):
        data = floquet_data(make_periodic("mathieu:1.0"), 2.0, TIGHT)
        self.assertAlmostEqual(data.gamma_increment, data.k, delta=1e-8)
        xs = np.linspace(0, 20, 81)
        gamma = data.gamma(xs)
        self.assertTrue(np.all(np.diff(gamma) > 0))
        residue = np.angle(data.phi(xs) * np.exp(-1j * gamma))
        np.testing.assert_allclose(residue, 0.0, atol=1e-7)

    def test_capital_gamma(self):
        data = floquet_data(make_periodic("mathieu:1.0"), 2.0, TIGHT)
        xs = np.linspace(0, 1, 2001)
        trapezoid = integrate.trapezoid(data.gamma_prime(xs) ** -2, xs)
        self.assertAlmostEqual(capital_gamma(data, TIGHT), trapezoid, delta=1e-6)

    def test_gamma_prime_bounds(self):
        # γ' averages to k over one period
        data = floquet_data(make_periodic("mathieu:1.0"), 2.0, TIGHT)
        lo, hi = gamma_prime_bounds(data)
        self.assertLess(0, lo)
        self.assertLess(lo, data.k)
        self.assertLess(data.k, hi)
        self.assertRaises(InputError, gamma_prime_bounds, data, 1)


class TestQuasimomentum(unittest.TestCase):
    def test_half_band_energy(self):
        energy = half_band_energy(make_periodic("zero"), (1.0, 4.0), TIGHT)
        self.assertAlmostEqual(energy, math.pi**2 / 4, delta=1e-9)

    def test_slope(self):
        slope = quasimomentum_slope(make_periodic("zero"), 4.0)
        self.assertAlmostEqual(slope, 0.25, delta=1e-6)
