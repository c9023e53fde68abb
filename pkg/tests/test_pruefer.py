import doctest
import math
import unittest

import numpy as np
from hypothesis import assume, given, settings, strategies as st
from scipy.special import sici

import spectra.pruefer

from spectra.exc import HypothesisError, InputError
from spectra.floquet import floquet_data, solve_schrodinger
from spectra.numerics import Tolerance, quad
from spectra.potentials import make_decaying, make_periodic
from spectra.pruefer import (
    fourier_mode_integral,
    gamma_log_integral,
    initial_state,
    orthogonality_integrals,
    osc_integral,
    pruefer_flow,
    reconstruct_solution,
    to_rho,
    weight_function,
)


TIGHT = Tolerance(abs_tol=1e-12, rel_tol=1e-12)


def load_tests(loader, tests, ignore):
    tests.addTests(doctest.DocTestSuite(spectra.pruefer))
    return tests


def cos_over_shift(a, L):
    """``∫_0^L cos(a x) / (1 + x) dx`` in closed form."""
    si_0, ci_0 = sici(a)
    si_L, ci_L = sici(a * (1 + L))
    return math.cos(a) * (ci_L - ci_0) + math.sin(a) * (si_L - si_0)


def sin_over_shift(a, L):
    """``∫_0^L sin(a x) / (1 + x) dx`` in closed form."""
    si_0, ci_0 = sici(a)
    si_L, ci_L = sici(a * (1 + L))
    return math.cos(a) * (si_L - si_0) - math.sin(a) * (ci_L - ci_0)


class TestRho(unittest.TestCase):
    data = floquet_data(make_periodic("mathieu:1.0"), 2.0, TIGHT)

    @settings(derandomize=True, max_examples=30, deadline=None)
    @given(
        st.floats(min_value=-3, max_value=3),
        st.floats(min_value=-3, max_value=3),
    )
    def test_initial_state_reconstructs(self, u0, u0prime):
        assume(math.hypot(u0, u0prime) > 1e-3)
        init = initial_state(self.data, u0, u0prime)
        traj = pruefer_flow(
            self.data.V0, make_decaying("zero"), 2.0, 1.0, init, data=self.data
        )
        u, uprime = reconstruct_solution(traj, 0.0)
        self.assertAlmostEqual(float(u), u0, delta=1e-9)
        self.assertAlmostEqual(float(uprime), u0prime, delta=1e-9)

    def test_rho_at_later_point(self):
        d = to_rho(self.data, 0.3, -1.2, 2.5)
        phi, phi_prime = self.data.frame(2.5)
        self.assertAlmostEqual(float(np.imag(d.rho * phi)), 0.3, delta=1e-12)
        self.assertAlmostEqual(float(np.imag(d.rho * phi_prime)), -1.2, delta=1e-12)
        self.assertAlmostEqual(
            float(d.R * abs(phi) * math.sin(d.theta)), 0.3, delta=1e-12
        )

    def test_degenerate_data(self):
        self.assertRaises(InputError, to_rho, self.data, 0.0, 0.0, 0.0)


class TestPrueferFlow(unittest.TestCase):
    def test_matches_direct_solution(self):
        v0 = make_periodic("mathieu:1.0")
        v = make_decaying("power:1,1")
        data = floquet_data(v0, 2.0, TIGHT)
        traj = pruefer_flow(v0, v, 2.0, 50.0, initial_state(data, 0.0, 1.0), TIGHT, data=data)
        direct = solve_schrodinger(
            lambda x: v0(x) + v(x), 2.0, (0.0, 50.0), [0.0, 1.0], TIGHT
        )
        xs = np.linspace(0, 50, 201)
        u, uprime = reconstruct_solution(traj, xs)
        expected = direct(xs)
        scale = np.max(np.abs(expected[0]))
        np.testing.assert_allclose(u, expected[0], atol=1e-5 * scale)
        np.testing.assert_allclose(uprime, expected[1], atol=1e-5 * np.max(np.abs(expected[1])))

    def test_free_angle_is_linear(self):
        traj = pruefer_flow(
            make_periodic("zero"), make_decaying("zero"), 4.0, 10.0, (1.0, 0.0), TIGHT
        )
        np.testing.assert_allclose(traj.theta, 2 * traj.grid.points, atol=1e-8)
        np.testing.assert_allclose(traj.lnR, 0.0, atol=1e-10)
        self.assertEqual(traj.monotone_from(), 0.0)

    def test_angle_eventually_increases(self):
        traj = pruefer_flow(
            make_periodic("mathieu:1.0"),
            make_decaying("power:3,1"),
            2.0,
            40.0,
            (1.0, 0.0),
        )
        start = traj.monotone_from()
        self.assertIsNotNone(start)
        self.assertLess(start, 40.0)

    def test_input_errors(self):
        v0, v = make_periodic("zero"), make_decaying("zero")
        self.assertRaises(InputError, pruefer_flow, v0, v, 1.0, 0.0, (1.0, 0.0))
        self.assertRaises(InputError, pruefer_flow, v0, v, 1.0, math.inf, (1.0, 0.0))
        self.assertRaises(InputError, pruefer_flow, v0, v, 1.0, 5.0, (0.0, 0.0))
        traj = pruefer_flow(v0, v, 1.0, 5.0, (1.0, 0.0))
        self.assertRaises(InputError, reconstruct_solution, traj, 5.5)


class TestOscillatoryIntegrals(unittest.TestCase):
    def test_closed_form(self):
        value = osc_integral(0.3, None, 500.0, TIGHT)
        self.assertAlmostEqual(value, sin_over_shift(0.3, 500.0), delta=1e-8)

    def test_negative_frequency(self):
        self.assertAlmostEqual(
            osc_integral(-1.5, None, 50.0), -sin_over_shift(1.5, 50.0), delta=1e-8
        )

    def test_zeroth_mode(self):
        mode = fourier_mode_integral(0, 2.0, None, 100.0)
        self.assertAlmostEqual(mode.real, osc_integral(2.0, None, 100.0), delta=1e-9)
        self.assertAlmostEqual(mode.imag, 0.0, delta=1e-12)

    def test_fourier_mode_decays_with_index(self):
        values = [abs(fourier_mode_integral(k, 1.0, None, 200.0)) for k in (1, 2, 4)]
        self.assertEqual(values, sorted(values, reverse=True))

    def test_errors(self):
        self.assertRaises(InputError, osc_integral, 0.0, None, 10.0)
        self.assertRaises(InputError, osc_integral, 1.0, None, 0.0)
        self.assertRaises(HypothesisError, fourier_mode_integral, 1, 7.0, None, 10.0)
        self.assertRaises(HypothesisError, fourier_mode_integral, 1, 0.0, None, 10.0)
        self.assertRaises(InputError, fourier_mode_integral, 0.5, 1.0, None, 10.0)


class TestOrthogonality(unittest.TestCase):
    def test_free_closed_form(self):
        # θ(x, E) = √E x for V0 = V = 0
        v0, v = make_periodic("zero"), make_decaying("zero")
        I4, I22 = orthogonality_integrals(v0, v, 1.0, 1.44, 100.0)
        self.assertAlmostEqual(I4, cos_over_shift(4.0, 100.0), delta=1e-6)
        expected = 0.5 * (cos_over_shift(0.4, 100.0) - cos_over_shift(4.4, 100.0))
        self.assertAlmostEqual(I22, expected, delta=1e-6)

    def test_zero_weight(self):
        v0, v = make_periodic("zero"), make_decaying("power:1,1")
        self.assertEqual(orthogonality_integrals(v0, v, 1.0, 1.44, 10.0, f="zero"), (0.0, 0.0))

    def test_errors(self):
        v0, v = make_periodic("zero"), make_decaying("zero")
        self.assertRaises(InputError, orthogonality_integrals, v0, v, 1.0, 1.0, 10.0)
        self.assertRaises(HypothesisError, orthogonality_integrals, v0, v, 1.0, 4.0, 10.0)
        self.assertRaises(
            InputError, orthogonality_integrals, v0, v, 1.0, 1.44, 10.0, f="square"
        )

    def test_weights(self):
        data = floquet_data(make_periodic("zero"), 4.0)
        x = np.array([0.0, 0.25, 0.5])
        np.testing.assert_allclose(weight_function("cos", data)(x), [1.0, 0.0, -1.0], atol=1e-15)
        np.testing.assert_allclose(weight_function("gamma", data)(x), 0.25, rtol=1e-8)
        np.testing.assert_allclose(weight_function("phi", data)(x), 1.0, rtol=1e-8)


class TestGammaLogIntegral(unittest.TestCase):
    def test_matches_quadrature(self):
        data = floquet_data(make_periodic("square:2,0.4"), 3.0, TIGHT)
        expected = quad(
            lambda x: float(data.gamma_prime(x)) ** -2 / (1 + x),
            (0.0, 20.5),
            TIGHT,
            points=[p for n in range(21) for p in (n, n + 0.4)],
        )
        self.assertAlmostEqual(gamma_log_integral(data, 20.5), expected, delta=1e-8)

    def test_invalid_length(self):
        data = floquet_data(make_periodic("zero"), 1.0)
        self.assertRaises(InputError, gamma_log_integral, data, 0.0)
