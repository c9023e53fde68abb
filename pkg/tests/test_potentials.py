import doctest
import math
import unittest
from pathlib import Path

import numpy as np
from hypothesis import given, settings, strategies as st

import spectra.potentials

from spectra.exc import DescriptorError, InputError
from spectra.potentials import envelope_holds, make_decaying, make_periodic, truncate


DATA = Path(__file__).parent / "data"


def load_tests(loader, tests, ignore):
    tests.addTests(doctest.DocTestSuite(spectra.potentials))
    return tests


class TestPeriodic(unittest.TestCase):
    @settings(derandomize=True, max_examples=100)
    @given(
        st.sampled_from(
            ["mathieu:1.5", "mathieu:-0.5 + mathieu:2", f"samples:{DATA / 'samples.txt'}"]
        ),
        st.floats(min_value=0, max_value=100),
    )
    def test_periodicity(self, descriptor, x):
        v0 = make_periodic(descriptor)
        self.assertAlmostEqual(float(v0(x + 3)), float(v0(x)), delta=1e-9)

    def test_zero(self):
        v0 = make_periodic("zero")
        self.assertTrue(v0.is_zero)
        self.assertEqual(v0(np.array([0.1, 7.3])).tolist(), [0.0, 0.0])
        self.assertTrue(make_periodic("mathieu:0").is_zero)

    def test_mathieu(self):
        v0 = make_periodic("mathieu:2")
        self.assertAlmostEqual(float(v0(0.0)), 2.0)
        self.assertAlmostEqual(float(v0(1.5)), -2.0)
        self.assertEqual(v0.breakpoints, ())

    def test_square_breakpoints(self):
        v0 = make_periodic("square:2,0.5")
        self.assertEqual(v0.breakpoints_in(0.0, 2.0), [0.5, 1.0, 1.5])
        self.assertEqual(make_periodic("square:2,1").breakpoints, ())

    def test_samples(self):
        v0 = make_periodic(f"samples:{DATA / 'samples.txt'}")
        self.assertEqual(v0.breakpoints, (0.0, 0.5))
        values = v0(np.array([0.25, 0.75, 1.5]))
        np.testing.assert_allclose(values, [2.0, 2.0, 3.0])

    def test_bad_descriptors(self):
        bad = [
            "square:2",
            "square:2,1.5",
            "mathieu:1,2",
            "zero:1",
            "power:1,1",
            f"samples:{DATA / 'missing.txt'}",
            f"samples:{DATA / 'run.ini'}",
        ]
        for descriptor in bad:
            with self.subTest(descriptor=descriptor):
                self.assertRaises(DescriptorError, make_periodic, descriptor)


class TestDecaying(unittest.TestCase):
    def test_power(self):
        v = make_decaying("power:2,0.5")
        self.assertEqual(float(v(3.0)), 1.0)
        self.assertEqual(v.envelope, (2.0, 0.5))
        self.assertEqual(v.support, math.inf)

    def test_wvn_phase(self):
        v = make_decaying("wvn:1,1,1,1.5707963267948966")
        self.assertAlmostEqual(float(v(0.0)), 1.0)

    def test_bump(self):
        v = make_decaying("bump:5,1,2")
        self.assertEqual(v(np.array([0.5, 1.0, 1.5, 2.0, 2.5])).tolist(), [0, 5, 5, 5, 0])
        self.assertEqual(v.support, 2.0)
        self.assertEqual(v.breakpoints, (1.0, 2.0))
        self.assertTrue(v.in_lp(1))

    def test_exp(self):
        v = make_decaying("exp:2,1")
        self.assertAlmostEqual(float(v(1.0)), 2 / math.e)
        self.assertEqual(v.support, math.inf)
        # Peak of (1 + x)**3 e^{-x} at x = 2
        slow = make_decaying("power:1,3 + exp:1,1")
        self.assertAlmostEqual(slow.amplitude, 1 + 27 * math.exp(-2))

    def test_zero(self):
        v = make_decaying("zero")
        self.assertTrue(v.is_zero)
        self.assertEqual(v.support, 0.0)

    @settings(derandomize=True, max_examples=50)
    @given(
        st.sampled_from(
            [
                "power:1,0.9",
                "wvn:2,1,1",
                "bump:5,0,1 + power:-1,0.5",
                "exp:3,0.5 + power:1,2",
                "power:1,1 + wvn:1,0.5,0.7 + bump:2,1,3",
            ]
        )
    )
    def test_envelope_holds(self, descriptor):
        v = make_decaying(descriptor)
        self.assertTrue(envelope_holds(v, np.linspace(0, 200, 4001)))

    def test_lp_membership(self):
        self.assertTrue(make_decaying("power:1,0.9").in_lp(1.5))
        self.assertFalse(make_decaying("power:1,0.5").in_lp(1.5))
        self.assertRaises(InputError, make_decaying, "power:1,0.4", p=2)
        self.assertEqual(make_decaying("power:1,0.6", p=2).p, 2)

    def test_bad_descriptors(self):
        bad = ["bump:1,2,1", "bump:1,-1,1", "exp:1,0", "power:1,-1", "mathieu:1", "power:1"]
        for descriptor in bad:
            with self.subTest(descriptor=descriptor):
                self.assertRaises(DescriptorError, make_decaying, descriptor)


class TestTruncate(unittest.TestCase):
    def test_closed_at_L(self):
        v = truncate(make_decaying("power:1,1 + bump:1,0,20"), 10)
        self.assertEqual(float(v(10.0)), 1 + 1 / 11)
        self.assertEqual(float(v(10.000001)), 0.0)
        self.assertEqual(v.breakpoints, (10.0,))
        self.assertEqual(v.support, 10.0)
        self.assertEqual(v.envelope, make_decaying("power:1,1 + bump:1,0,20").envelope)

    def test_truncate_twice(self):
        v = truncate(truncate(make_decaying("power:1,1"), 10), 20)
        self.assertEqual(v.L, 10.0)
        self.assertTrue(v.descriptor.endswith("|L=10.0"))

    def test_bad_length(self):
        for L in (0, -1, math.inf, math.nan):
            with self.subTest(L=L):
                self.assertRaises(InputError, truncate, make_decaying("zero"), L)
