import doctest
import math
import os
import threading
import unittest
from unittest import mock

import numpy as np
from hypothesis import given, settings, strategies as st

import spectra.numerics

from spectra.exc import InputError, StepLimitError
from spectra.numerics import (
    Grid,
    PanelGrid,
    Tolerance,
    find_root,
    fit_envelope,
    fit_line,
    integrate_ode,
    parallel_map,
    quad,
    thread_count,
)


TIGHT = Tolerance(abs_tol=1e-12, rel_tol=1e-12)


def load_tests(loader, tests, ignore):
    tests.addTests(doctest.DocTestSuite(spectra.numerics))
    return tests


class TestTolerance(unittest.TestCase):
    def test_defaults(self):
        tol = Tolerance()
        self.assertEqual((tol.abs_tol, tol.rel_tol, tol.max_steps), (1e-10, 1e-10, 10_000_000))

    def test_invalid(self):
        self.assertRaises(InputError, Tolerance, -1e-10, 1e-10)
        self.assertRaises(InputError, Tolerance, 0.0, 0.0)
        self.assertRaises(InputError, Tolerance, 1e-10, 1e-10, 0)

    def test_scaled(self):
        self.assertEqual(Tolerance(1e-8, 1e-6).scaled(2), Tolerance(2e-8, 2e-6))


class TestGrid(unittest.TestCase):
    def test_per_unit(self):
        grid = Grid.per_unit(0.0, 2.0, 4)
        self.assertEqual(len(grid), 9)
        self.assertEqual(grid.span, (0.0, 2.0))

    def test_invalid(self):
        self.assertRaises(InputError, Grid, [1.0])
        self.assertRaises(InputError, Grid, [0.0, 0.0, 1.0])
        self.assertRaises(InputError, Grid, [0.0, math.nan])

    def test_read_only(self):
        grid = Grid.uniform(0, 1, 3)
        with self.assertRaises(ValueError):
            grid.points[0] = 5.0


class TestIntegrateODE(unittest.TestCase):
    def test_breakpoints_keep_accuracy(self):
        def rhs(x, y):
            return [1.0 if x < 0.5 else -1.0]

        solution = integrate_ode(rhs, (0.0, 1.0), [0.0], TIGHT, breakpoints=[0.5])
        self.assertAlmostEqual(float(solution(0.5)[0]), 0.5, delta=1e-12)
        self.assertAlmostEqual(float(solution.end[0]), 0.0, delta=1e-12)

    def test_backwards(self):
        solution = integrate_ode(lambda x, y: y, (1.0, 0.0), [math.e], TIGHT)
        self.assertAlmostEqual(float(solution(0.0)[0]), 1.0, delta=1e-10)
        self.assertEqual(solution.x_span, (1.0, 0.0))

    def test_complex_state(self):
        solution = integrate_ode(lambda x, y: 1j * y, (0.0, math.pi), [1 + 0j], TIGHT)
        self.assertAlmostEqual(complex(solution.end[0]), -1, delta=1e-10)

    def test_dense_output_shape(self):
        solution = integrate_ode(lambda x, y: [y[1], -y[0]], (0, 3), [0.0, 1.0], TIGHT)
        xs = np.linspace(0, 3, 7)
        values = solution(xs)
        self.assertEqual(values.shape, (2, 7))
        np.testing.assert_allclose(values[0], np.sin(xs), atol=1e-8)
        np.testing.assert_allclose(solution.interpolant(xs)[1], np.cos(xs), atol=1e-8)

    def test_outside_span(self):
        solution = integrate_ode(lambda x, y: y, (0.0, 1.0), [1.0])
        self.assertRaises(InputError, solution, 1.5)

    def test_step_limit(self):
        tol = Tolerance(1e-10, 1e-10, max_steps=3)
        with self.assertRaises(StepLimitError) as context:
            integrate_ode(lambda x, y: [y[1], -y[0]], (0, 100), [0.0, 1.0], tol)
        self.assertEqual(context.exception.max_steps, 3)
        self.assertGreater(context.exception.last_x, 0)

    def test_non_finite(self):
        self.assertRaises(InputError, integrate_ode, lambda x, y: [math.nan], (0, 1), [1.0])
        self.assertRaises(InputError, integrate_ode, lambda x, y: y, (0, 0), [1.0])
        self.assertRaises(InputError, integrate_ode, lambda x, y: y, (0, 1), [math.inf])


class TestRootsAndQuadrature(unittest.TestCase):
    def test_find_root(self):
        root = find_root(math.cos, (0.0, 3.0), TIGHT)
        self.assertAlmostEqual(root, math.pi / 2, delta=1e-12)
        self.assertEqual(find_root(lambda x: x - 1, (1.0, 2.0)), 1.0)

    def test_no_bracket(self):
        self.assertRaises(InputError, find_root, lambda x: x * x + 1, (-1.0, 1.0))

    def test_quad_complex(self):
        value = quad(lambda x: np.exp(1j * x), (0.0, math.pi), TIGHT)
        self.assertAlmostEqual(value, 2j, delta=1e-10)

    def test_quad_long_interval(self):
        value = quad(lambda x: math.sin(x) ** 2, (0.0, 200 * math.pi), TIGHT)
        self.assertAlmostEqual(value, 100 * math.pi, delta=1e-8)

    def test_quad_breakpoints(self):
        value = quad(lambda x: 1.0 if x < 1 / 3 else 0.0, (0.0, 1.0), TIGHT, points=[1 / 3])
        self.assertAlmostEqual(value, 1 / 3, delta=1e-12)

    def test_quad_reversed(self):
        self.assertAlmostEqual(quad(lambda x: x, (1.0, 0.0)), -0.5, delta=1e-12)
        self.assertEqual(quad(lambda x: x, (2.0, 2.0)), 0.0)


class TestPanelGrid(unittest.TestCase):
    @settings(derandomize=True, max_examples=30)
    @given(
        st.floats(min_value=0.1, max_value=5),
        st.floats(min_value=0.05, max_value=0.5),
    )
    def test_cumulative(self, frequency, width):
        grid = PanelGrid.build(0.0, 10.0, width=width)
        cumulative = grid.cumulative(np.cos(frequency * grid.nodes))
        np.testing.assert_allclose(
            cumulative, np.sin(frequency * grid.nodes) / frequency, atol=1e-11
        )

    def test_antiderivative(self):
        grid = PanelGrid.build(0.0, 5.0, width=0.5, breakpoints=[math.e])
        self.assertIn(math.e, grid.edges)
        F = grid.antiderivative(np.exp(-grid.nodes))
        xs = np.array([0.0, 1.0, math.e, 4.99, 5.0])
        np.testing.assert_allclose(F(xs), 1 - np.exp(-xs), atol=1e-13)
        self.assertRaises(InputError, F, 5.1)

    def test_edge_values(self):
        grid = PanelGrid.build(0.0, 3.0, width=1.0, order=4)
        np.testing.assert_allclose(grid.edge_values(grid.nodes), [0.0, 0.5, 2.0, 4.5])

    def test_jump_at_edge(self):
        grid = PanelGrid.build(0.0, 2.0, width=1.0, breakpoints=[0.7])
        values = grid.evaluate(lambda x: np.where(x < 0.7, 1.0, 0.0))
        self.assertAlmostEqual(float(grid.integrate(values)), 0.7, delta=1e-13)

    def test_graded(self):
        grid = PanelGrid.graded(0.0, 1000.0, width=0.5, max_width=2.0)
        self.assertLessEqual(grid.widths.max(), 2.0)
        self.assertLessEqual(grid.widths[0], 0.5)
        value = grid.integrate(1 / (1 + grid.nodes) ** 2)
        self.assertAlmostEqual(float(value), 1 - 1 / 1001, delta=1e-12)

    def test_invalid(self):
        self.assertRaises(InputError, PanelGrid, [0.0, 1.0, 1.0])
        self.assertRaises(InputError, PanelGrid.build, 1.0, 1.0)


class TestFits(unittest.TestCase):
    def test_fit_line(self):
        x = np.linspace(0, 10, 11)
        slope, intercept, r2 = fit_line(x, 3 * x - 2)
        self.assertAlmostEqual(slope, 3.0)
        self.assertAlmostEqual(intercept, -2.0)
        self.assertAlmostEqual(r2, 1.0)

    def test_envelope_covers_points(self):
        rng = np.random.default_rng(0)
        x = np.linspace(0, 5, 50)
        y = 2 * x + rng.normal(size=x.size)
        fit = fit_envelope(x, y)
        self.assertTrue(np.all(fit(x) >= y - 1e-12))
        self.assertGreaterEqual(fit.envelope_intercept, fit.intercept)


class TestParallelMap(unittest.TestCase):
    def test_thread_count(self):
        with mock.patch.dict(os.environ, {"SPECTRA_THREADS": "4"}):
            self.assertEqual(thread_count(), 4)
        with mock.patch.dict(os.environ, {"SPECTRA_THREADS": "0"}):
            self.assertEqual(thread_count(), 1)
        with mock.patch.dict(os.environ, {"SPECTRA_THREADS": "many"}):
            self.assertRaises(InputError, thread_count)
        with mock.patch.dict(os.environ, clear=True):
            self.assertEqual(thread_count(), 1)

    def test_order_preserved(self):
        squares = parallel_map(lambda x: x * x, range(20), threads=4)
        self.assertEqual(squares, [x * x for x in range(20)])

    def test_sequential_by_default(self):
        seen = set()

        def record(x):
            seen.add(threading.get_ident())
            return x

        with mock.patch.dict(os.environ, {"SPECTRA_THREADS": "1"}):
            self.assertEqual(parallel_map(record, range(5)), list(range(5)))
        self.assertEqual(seen, {threading.get_ident()})
