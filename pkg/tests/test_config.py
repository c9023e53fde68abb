import doctest
import unittest
from pathlib import Path

import spectra.config
import spectra.obj

from spectra.config import decode_ini, flatten, load_config, parse_ini_name
from spectra.exc import ConfigError
from spectra.obj import RunConfig


DATA = Path(__file__).parent / "data"


def load_tests(loader, tests, ignore):
    tests.addTests(doctest.DocTestSuite(spectra.config))
    tests.addTests(doctest.DocTestSuite(spectra.obj))
    return tests


class TestDecodeINI(unittest.TestCase):
    def test_decode_ini(self):
        config = """\
[run]
v0 = mathieu:1.0
tol.abs = 1e-10
[tol]
rel = 1e-9
[other.group]
a = 1
b = "quoted"
        """
        self.assertEqual(
            decode_ini(config),
            {
                "run": {"v0": "mathieu:1.0", "tol": {"abs": 1e-10}},
                "tol": {"rel": 1e-9},
                "other": {"group": {"a": 1, "b": "quoted"}},
            },
        )

    def test_implicit_run_section(self):
        result = decode_ini("# comment\nv0 = square:2,0.5\nseed = 0x10\n")
        self.assertEqual(result, {"run": {"v0": "square:2,0.5", "seed": 16}})

    def test_raw_text(self):
        result = decode_ini("L = 1e2\nseed = 0x10\n[tol]\nrel = ${run:L}", literal=False)
        self.assertEqual(result, {"run": {"L": "1e2", "seed": "0x10"}, "tol": {"rel": "1e2"}})

    def test_option_names_keep_case(self):
        self.assertEqual(decode_ini("E1 = 1.5\nL = 10")["run"], {"E1": 1.5, "L": 10})

    def test_interpolation(self):
        result = decode_ini("[run]\nemin = 1.5\nemax = ${emin}")
        self.assertEqual(result["run"]["emax"], 1.5)

    def test_missing_interpolation(self):
        self.assertRaises(ConfigError, decode_ini, "[run]\nemax = ${emin}")

    def test_malformed_file(self):
        self.assertRaises(ConfigError, decode_ini, "[run]\nno delimiter here")

    def test_bad_names(self):
        for text in ["[tol.]\na = 1", "[.tol]\na = 1", "[run]\ntol..abs = 1"]:
            with self.subTest(text=text):
                self.assertRaises(ConfigError, decode_ini, text)
        with self.assertRaises(ConfigError) as context:
            parse_ini_name("tol..abs")
        self.assertEqual(context.exception.position, 4)

    def test_value_and_group(self):
        self.assertRaises(ConfigError, decode_ini, "[run]\ntol = 1\ntol.abs = 2")


class TestFlatten(unittest.TestCase):
    def test_run_file(self):
        options = load_config(DATA / "run.ini")
        self.assertEqual(
            options,
            {
                "v0": "mathieu:1.0",
                "v": "power:1,0.9",
                "E": 2.0,
                "xmax": 1000,
                "abs_tol": 1e-12,
                "rel_tol": 1e-9,
            },
        )

    def test_dashes_become_underscores(self):
        self.assertEqual(flatten(decode_ini("series-x = 3")), {"series_x": 3})

    def test_unknown_dotted_name(self):
        self.assertRaises(ConfigError, flatten, decode_ini("[tol]\nfoo = 1"))
        self.assertRaises(ConfigError, flatten, decode_ini("[grid.extra]\nx = 1"))

    def test_missing_file(self):
        with self.assertRaises(ConfigError) as context:
            load_config(DATA / "does-not-exist.ini")
        self.assertIn("Could not read config file", context.exception.message)


class TestRunConfig(unittest.TestCase):
    def test_canonical_is_sorted_and_compact(self):
        config = RunConfig(v="bump:5,0,1", L=2, eps=[0.01, 0.001], method="both")
        self.assertEqual(
            config.canonical(), 'L=2 eps=[0.01,0.001] method="both" v="bump:5,0,1"'
        )

    def test_canonical_round_trip_with_spaces(self):
        config = RunConfig(g="exp:1,1; exp:1,1", out=None, flag=True)
        parsed = RunConfig.from_canonical(config.canonical())
        self.assertEqual(dict(parsed), dict(config))

    def test_float_repr(self):
        self.assertEqual(RunConfig(x=0.1 + 0.2).canonical(), "x=0.30000000000000004")
