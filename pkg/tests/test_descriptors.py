import doctest
import math
import unittest

from hypothesis import given, settings, strategies as st

import spectra.descriptors

from spectra.descriptors import parse_descriptor, scan_number, scan_value
from spectra.exc import DescriptorError


def load_tests(loader, tests, ignore):
    tests.addTests(doctest.DocTestSuite(spectra.descriptors))
    return tests


class TestScanNumber(unittest.TestCase):
    def test_inf(self):
        self.assertEqual(scan_value("inf"), math.inf)
        self.assertEqual(scan_value("+inf"), math.inf)
        self.assertEqual(scan_value("-inf"), -math.inf)

    def test_nan(self):
        self.assertTrue(math.isnan(scan_value("nan")))
        self.assertTrue(math.isnan(scan_value("-nan")))

    def test_constants(self):
        self.assertEqual(scan_value("π"), math.pi)
        self.assertEqual(scan_value("-PI"), -math.pi)
        self.assertEqual(scan_value("τ"), math.tau)
        self.assertEqual(scan_value("E"), math.e)

    def test_e_is_not_a_prefix(self):
        self.assertEqual(scan_value("Exp"), "Exp")

    def test_ints(self):
        self.assertEqual(scan_value("0b101"), 5)
        self.assertEqual(scan_value("0o17"), 15)
        self.assertEqual(scan_value("0xff"), 255)
        self.assertEqual(scan_value("1_000_000"), 1_000_000)
        self.assertEqual(scan_value("-7"), -7)

    def test_floats(self):
        self.assertEqual(scan_value("1.5"), 1.5)
        self.assertEqual(scan_value(".5"), 0.5)
        self.assertEqual(scan_value("1e-3"), 1e-3)
        self.assertEqual(scan_value("1_0.2_5"), 10.25)

    def test_scan_stops_at_non_number(self):
        self.assertEqual(scan_number("2.5,3", 0), (2.5, 3))
        self.assertEqual(scan_number("x,2.5", 2), (2.5, 5))
        self.assertIsNone(scan_number("abc"))

    def test_other_literals(self):
        self.assertIs(scan_value("true"), True)
        self.assertIs(scan_value("false"), False)
        self.assertIsNone(scan_value("null"))
        self.assertEqual(scan_value('"a b"'), "a b")
        self.assertEqual(scan_value("  power:1,0.9  "), "power:1,0.9")

    def test_bad_quoted_string(self):
        self.assertRaises(DescriptorError, scan_value, '"abc')
        self.assertRaises(DescriptorError, scan_value, '"abc" x')

    @settings(derandomize=True, max_examples=200)
    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_float_repr(self, value):
        self.assertEqual(scan_value(repr(value)), value)

    @settings(derandomize=True, max_examples=200)
    @given(st.integers())
    def test_int_str(self, value):
        self.assertEqual(scan_value(str(value)), value)


class TestParseDescriptor(unittest.TestCase):
    def test_sum_of_terms(self):
        terms = parse_descriptor(" power:1, 0.9 +bump : 5,0,1 ")
        self.assertEqual([term.kind for term in terms], ["power", "bump"])
        self.assertEqual(terms[0].args, (1, 0.9))
        self.assertEqual(terms[1].args, (5, 0, 1))
        self.assertEqual(terms[0].source, "power:1, 0.9")

    def test_kind_without_arguments(self):
        (term,) = parse_descriptor("zero")
        self.assertEqual((term.kind, term.args), ("zero", ()))

    def test_kinds_are_case_insensitive(self):
        self.assertEqual(parse_descriptor("Mathieu:1")[0].kind, "mathieu")

    def test_path_argument(self):
        terms = parse_descriptor("samples: data/table.txt + mathieu:1")
        self.assertEqual(terms[0].args, ("data/table.txt",))
        self.assertEqual(terms[1].args, (1,))

    def test_errors_point_at_position(self):
        cases = [
            ("", 0),
            ("   ", 3),
            ("1abc", 0),
            ("square:2,", 9),
            ("mathieu 1", 8),
            ("power:1,1 +", 11),
            ("samples:", 8),
        ]
        for string, position in cases:
            with self.subTest(string=string):
                with self.assertRaises(DescriptorError) as context:
                    parse_descriptor(string)
                self.assertEqual(context.exception.position, position)
