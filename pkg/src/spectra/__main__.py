"""Command line interface

Every experiment is one subcommand writing one table: ``#`` header lines
with the tool version, the canonical run config and a summary, then a
header row and one row per sample. ``--format json`` writes the same
fields as a JSON document.

Settings can also come from an INI file given by ``--config`` (see
:mod:`spectra.config`); flags override file values.

Exit codes: 0 on success, 2 on input errors (including unknown flags),
3 on numerical non-convergence.

"""
import argparse
import logging
import math
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .config import load_config
from .descriptors import scan_value
from .encoder import encode, write_csv, write_json
from .exc import ConfigError, ConvergenceError, HypothesisError, InputError
from .floquet import (
    band_edges,
    capital_gamma,
    discriminant,
    floquet_data,
    gamma_prime_bounds,
    monodromy,
    solve_schrodinger,
)
from .multilinear import (
    YOUNG_CONSTANT,
    bound_ratios,
    build_martingale,
    cell_mass,
    convolution_ratio,
    multi_M,
    tail_B,
)
from .numerics import DEFAULT_TOLERANCE, Tolerance, fit_envelope, fit_line, parallel_map
from .obj import RunConfig
from .potentials import make_decaying, make_periodic
from .pruefer import fourier_mode_integral, initial_state, osc_integral, pruefer_flow
from .pruefer import orthogonality_integrals, reconstruct_solution
from .spectral import (
    DEFAULT_EPS_SEQUENCE,
    calibration_sweep,
    density_prufer,
    density_weyl,
    lee_bound_check,
    normalization,
    prufer_vectors,
    separate_set_scan,
)
from .wkb import kernel, kernel_identity_residual, series_check, substitution_check
from .wkb import wkb_compare, wkb_phase


__all__ = ["main", "run"]


log = logging.getLogger(__name__)


EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONVERGENCE = 3

# Settings that do not influence results and are left out of the config echo
NOT_ECHOED = ("config", "out", "threads", "verbose", "handler")


@dataclass
class Table:
    columns: Sequence[str]
    rows: List[Sequence] = field(default_factory=list)
    summary: Dict[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class Subcommand:
    name: str
    help: str
    configure: Callable
    handler: Callable


SUBCOMMANDS: Dict[str, Subcommand] = {}


def subcommand(name, help, configure):
    def register(handler):
        SUBCOMMANDS[name] = Subcommand(name, help, configure, handler)
        return handler

    return register


# ----------------------------------------------------------------------
# Argument types


def _number(string):
    value = scan_value(string)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise argparse.ArgumentTypeError(f"Expected a number, got {string!r}")
    return float(value)


def _integer(string):
    value = scan_value(string)
    if isinstance(value, bool) or not isinstance(value, int):
        raise argparse.ArgumentTypeError(f"Expected an integer, got {string!r}")
    return value


def _numbers(value):
    """Comma-separated numbers, or numbers that are already decoded."""
    if isinstance(value, (int, float)):
        return (float(value),)
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    items = [item for item in str(value).split(",") if item.strip()]
    if not items:
        raise argparse.ArgumentTypeError("Expected at least one number")
    return tuple(_number(item) for item in items)


def _descriptors(value):
    """One or more descriptors, as a list or separated by ``;``."""
    if isinstance(value, str):
        value = value.split(";")
    descriptors = [item.strip() for item in value if item.strip()]
    if not descriptors:
        raise InputError("Expected at least one descriptor")
    return descriptors


def _breakpoints(V0, V, L):
    points = set(V0.breakpoints_in(0.0, L))
    points.update(b for b in getattr(V, "breakpoints", ()) if 0 < b < L)
    return sorted(points)


def _energies(args):
    if args.esteps < 1:
        raise InputError(f"esteps must be positive, got {args.esteps}")
    if args.esteps == 1:
        return np.array([args.emin])
    return np.linspace(args.emin, args.emax, args.esteps)


# ----------------------------------------------------------------------
# Subcommands


def _potentials(parser, v0="zero", v="zero"):
    parser.add_argument("--v0", default=v0, help="Periodic background descriptor")
    parser.add_argument("--v", default=v, help="Decaying perturbation descriptor")


def _window(parser, emin=0.0, emax=10.0, esteps=None):
    parser.add_argument("--emin", type=_number, default=emin)
    parser.add_argument("--emax", type=_number, default=emax)
    if esteps is not None:
        parser.add_argument("--esteps", type=_integer, default=esteps)


def _configure_bands(parser):
    _potentials(parser)
    _window(parser)
    parser.add_argument("--step", type=_number, default=0.05, help="Discriminant scan spacing")


@subcommand("bands", "Band edges of the periodic operator", _configure_bands)
def bands(args, tol):
    V0 = make_periodic(args.v0)
    structure = band_edges(V0, (args.emin, args.emax), tol, step=args.step)
    rows = [(n, a, b) for n, (a, b) in enumerate(structure, start=1)]
    summary = {"bands": len(structure), "gaps": [list(gap) for gap in structure.gaps()]}
    return Table(("n", "a", "b"), rows, summary)


def _configure_density(parser):
    _potentials(parser)
    _window(parser, 1.0, 9.0, 9)
    parser.add_argument("--L", type=_number, default=1.0, help="Truncation point")
    parser.add_argument("--method", choices=("both", "prufer", "weyl"), default="both")
    parser.add_argument("--beta", type=_number, default=0.0, help="Boundary condition angle")
    parser.add_argument(
        "--eps",
        default=",".join(repr(e) for e in DEFAULT_EPS_SEQUENCE),
        help="Decreasing ε sequence of the Weyl extrapolation",
    )


@subcommand("density", "Spectral density of the truncated operator", _configure_density)
def density(args, tol):
    V0, V = make_periodic(args.v0), make_decaying(args.v)
    eps = _numbers(args.eps)

    def sample(E):
        prufer = weyl = spread = math.nan
        converged = True
        if args.method in ("both", "prufer"):
            prufer = density_prufer(V0, V, args.L, E, tol, beta=args.beta).density
        if args.method in ("both", "weyl"):
            result = density_weyl(V0, V, args.L, E, eps, tol, beta=args.beta)
            weyl, spread, converged = result.density, result.spread, result.converged
        gap = abs(prufer - weyl) / abs(prufer) if prufer else math.nan
        return (float(E), prufer, weyl, spread, converged, gap)

    rows = parallel_map(sample, _energies(args))
    gaps = [row[-1] for row in rows if not math.isnan(row[-1])]
    summary = {
        "max_relative_gap": max(gaps) if gaps else math.nan,
        "weyl_converged": all(row[4] for row in rows),
    }
    columns = ("E", "prufer", "weyl", "weyl_spread", "weyl_converged", "relative_gap")
    return Table(columns, rows, summary)


def _configure_prufer(parser):
    _potentials(parser, "mathieu:1.0", "power:1,1")
    parser.add_argument("--E", type=_number, default=2.0)
    parser.add_argument("--L", type=_number, default=50.0)
    parser.add_argument("--u0", type=_number, default=0.0)
    parser.add_argument("--u0prime", type=_number, default=1.0)
    parser.add_argument("--points", type=_integer, default=201)
    parser.add_argument(
        "--scenarios",
        type=_integer,
        default=0,
        help="Compare on this many random scenarios instead of one trajectory",
    )


def _prufer_direct(V0, V, E, L, u0, u0prime, points, tol):
    """Prüfer-reconstructed and directly integrated ``u`` on a uniform grid."""
    data = floquet_data(V0, E, tol)
    trajectory = pruefer_flow(V0, V, E, L, initial_state(data, u0, u0prime), tol, data=data)
    xs = np.linspace(0.0, L, points)
    u_prufer = reconstruct_solution(trajectory, xs)[0]

    def potential(x):
        return V0(x) + V(x)

    direct = solve_schrodinger(
        potential, E, (0.0, L), [u0, u0prime], tol, breakpoints=_breakpoints(V0, V, L)
    )
    u_direct = np.real(direct(xs)[0])
    error = float(np.max(np.abs(u_prufer - u_direct)) / np.max(np.abs(u_direct)))
    return xs, trajectory, u_prufer, u_direct, error


def _random_scenario(rng, tol):
    amplitude = round(float(rng.uniform(0.2, 2.0)), 6)
    v0 = f"mathieu:{amplitude!r}"
    if rng.random() < 0.5:
        c, alpha = (round(float(x), 6) for x in (rng.uniform(0.2, 1.5), rng.uniform(0.5, 1.5)))
        v = f"power:{c!r},{alpha!r}"
    else:
        c, b = (round(float(x), 6) for x in (rng.uniform(-3.0, 3.0), rng.uniform(1.0, 10.0)))
        v = f"bump:{c!r},0,{b!r}"
    bands = list(band_edges(make_periodic(v0), (0.5, 30.0), tol))
    a, b = bands[int(rng.integers(len(bands)))]
    E = round(float(a + (b - a) * rng.uniform(0.2, 0.8)), 6)
    u0, u0prime = (round(float(x), 6) for x in rng.uniform(-1.0, 1.0, 2))
    return v0, v, E, u0, u0prime


@subcommand("prufer", "Prüfer flow against direct integration", _configure_prufer)
def prufer(args, tol):
    if args.scenarios > 0:
        rng = np.random.default_rng(args.seed)
        scenarios = [_random_scenario(rng, tol) for _ in range(args.scenarios)]

        def compare(scenario):
            v0, v, E, u0, u0prime = scenario
            V0, V = make_periodic(v0), make_decaying(v)
            error = _prufer_direct(V0, V, E, args.L, u0, u0prime, args.points, tol)[-1]
            return (v0, v, E, u0, u0prime, error)

        rows = [(i, *row) for i, row in enumerate(parallel_map(compare, scenarios))]
        summary = {"max_relative_error": max(row[-1] for row in rows)}
        return Table(("scenario", "v0", "v", "E", "u0", "u0prime", "error"), rows, summary)

    V0, V = make_periodic(args.v0), make_decaying(args.v)
    xs, trajectory, u_prufer, u_direct, error = _prufer_direct(
        V0, V, args.E, args.L, args.u0, args.u0prime, args.points, tol
    )
    lnR, theta = trajectory.solution(xs)
    rows = list(
        zip(xs.tolist(), lnR.tolist(), theta.tolist(), u_prufer.tolist(), u_direct.tolist())
    )
    summary = {
        "relative_error": error,
        "monotone_from": trajectory.monotone_from(),
        "gamma_prime_bounds": gamma_prime_bounds(floquet_data(V0, args.E, tol)),
    }
    return Table(("x", "lnR", "theta", "u", "u_direct"), rows, summary)


def _configure_wkb(parser):
    _potentials(parser, "mathieu:1.0", "power:1,0.9")
    parser.add_argument("--E", type=_number, default=2.0)
    parser.add_argument("--xmax", type=_number, default=1000.0)
    parser.add_argument("--points", type=_integer, default=200)
    parser.add_argument("--series-x", type=_number, default=None, help="Check the series here")
    parser.add_argument(
        "--series-v", default=None, help="Compactly supported perturbation for the series check"
    )
    parser.add_argument("--nmax", type=_integer, default=20)


@subcommand("wkb-error", "Principal WKB term against direct integration", _configure_wkb)
def wkb_error(args, tol):
    V0, V = make_periodic(args.v0), make_decaying(args.v)
    data = floquet_data(V0, args.E, tol)
    comparison = wkb_compare(V0, V, args.E, args.xmax, tol, points=args.points, data=data)
    rows = list(zip(comparison.x.tolist(), comparison.r.tolist(), comparison.modulus.tolist()))
    summary = {"tail_max": comparison.tail_max, "decay": comparison.decay}
    if np.isfinite(V.support) and V.support < args.xmax:
        summary["max_beyond_support"] = float(np.max(comparison.r[comparison.x >= V.support]))
    if args.series_x is not None:
        W = V if args.series_v is None else make_decaying(args.series_v)
        series, error = series_check(V0, W, args.E, args.series_x, args.nmax, tol, data=data)
        summary.update(series_error=error, series_spread=series.spread, series_n0=series.n0)
        if W is not V:
            X = 4 * W.support
            exact = wkb_compare(V0, W, args.E, X, tol, points=args.points, data=data)
            summary["series_max_beyond_support"] = float(np.max(exact.r[exact.x >= W.support]))
    return Table(("x", "r", "modulus"), rows, summary)


def _configure_mlinear(parser):
    parser.add_argument(
        "--g", nargs="+", default="power:1,0.9", help="Descriptors of the test functions"
    )
    parser.add_argument("--p", type=_number, default=1.5)
    parser.add_argument("--s", type=_number, default=1.0)
    parser.add_argument("--nmax", type=_integer, default=6)
    parser.add_argument("--depth", type=_integer, default=6)
    parser.add_argument("--xmax", type=_number, default=64.0)
    parser.add_argument("--grid", type=_integer, default=33, help="Points per axis for M_n*")
    parser.add_argument("--v0", default="zero", help="Periodic background of the kernel")
    parser.add_argument(
        "--E", type=_number, default=None, help="Use the kernel w e^{-ih} g at this energy"
    )
    parser.add_argument(
        "--simplex-nmax", type=_integer, default=8, help="Check M_n(1)(0, x') up to this n"
    )
    parser.add_argument("--simplex-x", type=_number, default=2.5)


@subcommand("mlinear", "Multilinear operator bounds", _configure_mlinear)
def mlinear(args, tol):
    points = np.linspace(0.0, args.xmax, args.grid)

    def ratios_for(descriptor):
        V = make_decaying(descriptor)
        g = V if args.E is None else kernel(make_periodic(args.v0), V, args.E, args.xmax, tol)
        structure = build_martingale(V, args.p, args.depth, args.xmax)
        return bound_ratios(g, structure, args.nmax, points, s=args.s)

    descriptors = _descriptors(args.g)
    rows = []
    spreads = []
    for descriptor, table in zip(descriptors, parallel_map(ratios_for, descriptors)):
        rows += [(descriptor, row.n, row.m_star, row.b_norm, row.ratio) for row in table]
        ratios = [row.ratio for row in table if row.ratio > 0]
        spreads.append(max(ratios) / min(ratios) if ratios else math.nan)

    x = args.simplex_x
    simplex_error = max(
        (
            abs(multi_M([np.ones_like] * n, 0.0, x) - x**n / math.factorial(n))
            for n in range(1, args.simplex_nmax + 1)
        ),
        default=0.0,
    )
    positive = [row[-1] for row in rows if row[-1] > 0]
    summary = {
        "constant": max(positive) if positive else 0.0,
        "ratio_spread": max(spreads),
        "simplex_error": simplex_error,
    }
    return Table(("g", "n", "m_star", "b_norm", "ratio"), rows, summary)


def _configure_ortho(parser):
    _potentials(parser)
    parser.add_argument("--E1", type=_number, default=1.0)
    parser.add_argument("--gaps", default="1e-1,1e-2,1e-3,1e-4,1e-5", help="Values of E2 - E1")
    parser.add_argument("--L", default="1e4", help="One or more truncation lengths")
    parser.add_argument("--weight", default="one", help="1-periodic weight")


@subcommand("ortho", "Almost-orthogonality integrals", _configure_ortho)
def ortho(args, tol):
    V0, V = make_periodic(args.v0), make_decaying(args.v)
    lengths, gaps = _numbers(args.L), _numbers(args.gaps)
    cases = [(L, gap) for L in lengths for gap in gaps]

    def integrals(case):
        L, gap = case
        I4, I22 = orthogonality_integrals(V0, V, args.E1, args.E1 + gap, L, args.weight, tol)
        return (L, gap, math.log(1 / gap), I4, I22)

    rows = parallel_map(integrals, cases)
    longest = [row for row in rows if row[0] == max(lengths)]
    summary = {}
    if len(longest) >= 2:
        envelope = fit_envelope([row[2] for row in longest], [abs(row[4]) for row in longest])
        summary.update(
            envelope_slope=envelope.slope,
            envelope_intercept=envelope.envelope_intercept,
            envelope_r_squared=envelope.r_squared,
        )
    summary["max_abs_I4"] = max(abs(row[3]) for row in rows)
    by_gap = [[row[3] for row in rows if row[1] == gap] for gap in gaps]
    summary["I4_spread_in_L"] = max(max(values) - min(values) for values in by_gap)
    return Table(("L", "gap", "log_inv_gap", "I4", "I22"), rows, summary)


def _configure_martingale(parser):
    parser.add_argument("--f", default="power:1,0.9", help="Decaying function descriptor")
    parser.add_argument("--p", type=_number, default=1.5)
    parser.add_argument("--depth", type=_integer, default=8)
    parser.add_argument("--xmax", type=_number, default=1000.0)


@subcommand("martingale", "Adapted martingale structure", _configure_martingale)
def martingale(args, tol):
    f = make_decaying(args.f)
    structure = build_martingale(f, args.p, args.depth, args.xmax)
    total = cell_mass(f, args.p, 0.0, args.xmax, tol)
    rows = []
    for m in range(1, structure.depth + 1):
        for j, (a, b) in enumerate(structure.cells(m)):
            recomputed = cell_mass(f, args.p, a, b, tol)
            rows.append((m, j, a, b, structure.mass(a, b), recomputed, 2**m * recomputed / total))
    summary = {
        "total": structure.total,
        "recomputed_total": total,
        "discarded_mass": structure.discarded_mass,
        "adaptedness": max(row[-1] for row in rows),
    }
    return Table(("m", "j", "a", "b", "mass", "recomputed", "ratio"), rows, summary)


def _configure_mcheck(parser):
    _window(parser, -5.0, 50.0)
    parser.add_argument("--samples", type=_integer, default=100)
    parser.add_argument("--free-points", type=_integer, default=200)


def _random_periodic(rng):
    amplitude = round(float(rng.uniform(-3.0, 3.0)), 6)
    if rng.random() < 0.5:
        return f"mathieu:{amplitude!r}"
    return f"square:{amplitude!r},{round(float(rng.uniform(0.1, 0.9)), 6)!r}"


@subcommand("mcheck", "Monodromy determinant and free discriminant", _configure_mcheck)
def mcheck(args, tol):
    if args.samples < 1 or args.free_points < 1:
        raise InputError("samples and free-points must be positive")
    rng = np.random.default_rng(args.seed)
    cases = [
        (_random_periodic(rng), round(float(rng.uniform(args.emin, args.emax)), 6))
        for _ in range(args.samples)
    ]

    def det_error(case):
        v0, E = case
        return ("det", v0, E, abs(monodromy(make_periodic(v0), E, tol).det - 1))

    rows = parallel_map(det_error, cases)
    free = make_periodic("zero")
    for E in np.linspace(0.1, 50.0, args.free_points):
        exact = 2 * math.cos(math.sqrt(E))
        rows.append(("free", "zero", float(E), abs(discriminant(free, E, tol) - exact)))
    summary = {
        "max_det_error": max(row[3] for row in rows if row[0] == "det"),
        "max_free_error": max(row[3] for row in rows if row[0] == "free"),
    }
    return Table(("check", "v0", "E", "error"), rows, summary)


def _configure_osc(parser):
    parser.add_argument("--gammas", default="1e-1,1e-2,1e-3,1e-4,1e-5")
    parser.add_argument("--phase", choices=("zero", "log"), default="zero", help="G(x)")
    parser.add_argument("--L", type=_number, default=1e6)
    parser.add_argument("--modes", default="2,3,4,5,6,8,10,12,16")
    parser.add_argument("--mode-gamma", type=_number, default=1.0)
    parser.add_argument("--mode-L", type=_number, default=200.0)


@subcommand("osc", "Oscillatory integral bounds", _configure_osc)
def osc(args, tol):
    G = None if args.phase == "zero" else np.log1p
    gammas = _numbers(args.gammas)
    values = parallel_map(lambda gamma: osc_integral(gamma, G, args.L, tol), gammas)
    rows = [("gamma", gamma, value, 0.0, abs(value)) for gamma, value in zip(gammas, values)]
    modes = [int(k) for k in _numbers(args.modes)]
    mode_values = parallel_map(
        lambda k: fourier_mode_integral(k, args.mode_gamma, G, args.mode_L, tol), modes
    )
    rows += [
        ("mode", float(k), value.real, value.imag, abs(value))
        for k, value in zip(modes, mode_values)
    ]

    log_inv = np.log(1 / np.array(gammas))
    magnitudes = np.abs(values)
    slope, intercept, r_squared = fit_line(log_inv, magnitudes)
    inverse = fit_envelope(1 / np.array(gammas), magnitudes)
    summary = {
        "log_slope": slope,
        "log_intercept": intercept,
        "log_r_squared": r_squared,
        "inverse_slope": inverse.slope,
        "inverse_intercept": inverse.envelope_intercept,
    }
    tail = [(k, abs(v)) for k, v in zip(modes, mode_values) if abs(k) >= 2 and abs(v) > 0]
    if len(tail) >= 2:
        ks, magnitudes = zip(*tail)
        summary["mode_exponent"] = -fit_line(np.log(np.abs(ks)), np.log(magnitudes))[0]
    return Table(("kind", "parameter", "re", "im", "abs"), rows, summary)


def _configure_tail(parser):
    parser.add_argument(
        "--g", nargs="+", default="exp:1,1;exp:1,1", help="Descriptors of g_1, ..., g_n"
    )
    parser.add_argument("--x", default="0,0.5,1,2,4", help="Evaluation points")
    parser.add_argument("--cutoffs", default="20,40,80", help="Increasing cutoff ladder")
    parser.add_argument("--step", type=_number, default=1e-3, help="Finite-difference step")


@subcommand("tail", "Iterated tail integrals", _configure_tail)
def tail(args, tol):
    g_list = [make_decaying(d) for d in _descriptors(args.g)]
    cutoffs = _numbers(args.cutoffs)
    h = args.step

    def B(functions, x):
        if not functions:
            return 1.0
        return tail_B(functions, x, cutoffs, tol).value

    def evaluate(x):
        result = tail_B(g_list, x, cutoffs, tol)
        residual = math.nan
        if x >= h:
            derivative = (B(g_list, x + h) - B(g_list, x - h)) / (2 * h)
            residual = abs(derivative + complex(g_list[0](x)) * B(g_list[1:], x))
        value = result.value
        return (x, value.real, value.imag, result.spread, result.converged, residual)

    rows = parallel_map(evaluate, _numbers(args.x))
    residuals = [row[-1] for row in rows if not math.isnan(row[-1])]
    summary = {
        "n": len(g_list),
        "max_spread": max(row[3] for row in rows),
        "max_derivative_residual": max(residuals) if residuals else math.nan,
    }
    return Table(("x", "re", "im", "spread", "converged", "derivative_residual"), rows, summary)


def _configure_lee(parser):
    _potentials(parser, "mathieu:1.0", "power:1,1")
    parser.add_argument("--families", type=_integer, default=100)
    parser.add_argument("--size", type=_integer, default=5, help="Vectors per random family")
    parser.add_argument("--dim", type=_integer, default=50)
    parser.add_argument("--energies", default="1.2,1.6,2.0,2.4,2.8")
    parser.add_argument("--L", type=_number, default=1e4)
    parser.add_argument("--lengths", default="1e2,1e3,1e4", help="L values for A_i")


def _random_family(rng, size, dim):
    """Unit vectors with ``N sup |<e_i, e_j>| < 1``."""
    basis = np.linalg.qr(rng.standard_normal((dim, size)))[0].T
    noise = rng.standard_normal((size, dim))
    scale = rng.uniform(0.0, 0.5) / (size * np.sqrt(dim))
    while True:
        vectors = basis + scale * noise
        vectors /= np.linalg.norm(vectors, axis=1)[:, None]
        gram = vectors @ vectors.T
        if size * np.max(np.abs(gram - np.eye(size))) < 1:
            return vectors
        scale /= 2


@subcommand("lee", "Inner-product inequality for almost orthogonal vectors", _configure_lee)
def lee(args, tol):
    rng = np.random.default_rng(args.seed)
    rows = []
    for i in range(args.families):
        vectors = _random_family(rng, args.size, args.dim)
        check = lee_bound_check(vectors, rng.standard_normal(args.dim))
        rows.append(("random", i, check.alpha, check.lhs, check.rhs, check.holds))

    V0, V = make_periodic(args.v0), make_decaying(args.v)
    energies = _numbers(args.energies)
    vectors = prufer_vectors(V0, V, energies, args.L, tol)
    g = np.asarray(V(vectors.grid.nodes), dtype=float)
    try:
        check = lee_bound_check(vectors.vectors, g, vectors.weights)
        rows.append(("prufer", len(rows), check.alpha, check.lhs, check.rhs, check.holds))
    except HypothesisError as exc:
        log.warning("Prüfer vectors at L=%g: %s", args.L, exc)
        rows.append(("prufer", len(rows), math.nan, math.nan, math.nan, False))

    offsets = {}
    for E in energies:
        reference = 0.5 * capital_gamma(floquet_data(V0, E, tol), tol)
        offsets[E] = [
            normalization(V0, V, E, L, tol) - reference * math.log(L)
            for L in _numbers(args.lengths)
        ]
    summary = {
        "all_hold": all(row[-1] for row in rows),
        "normalization_offsets": [[E, *values] for E, values in offsets.items()],
        "max_offset_variation": max(max(v) - min(v) for v in offsets.values()),
    }
    return Table(("family", "index", "alpha", "lhs", "rhs", "holds"), rows, summary)


def _configure_separate(parser):
    _potentials(parser, "mathieu:1.0", "wvn:1,1,1")
    _window(parser, 0.5, 2.0, 100)
    parser.add_argument("--eps", type=_number, default=1e-2)
    parser.add_argument("--sigma", type=_number, default=0.0)
    parser.add_argument("--beta", type=_number, default=0.0)
    parser.add_argument("--C1", type=_number, default=1.0)
    parser.add_argument("--N", type=_integer, default=10)
    parser.add_argument("--c1-sweep", default=None, help="C1 values for a calibration sweep")


@subcommand("separate", "Scan for (ε, N)-separate sets", _configure_separate)
def separate(args, tol):
    V0, V = make_periodic(args.v0), make_decaying(args.v)
    report = separate_set_scan(
        V0,
        V,
        (args.emin, args.emax),
        args.eps,
        args.sigma,
        args.beta,
        args.C1,
        args.N,
        _energies(args),
        tol,
    )
    rows = [
        (E, k, value, E in report.resonant, E in report.candidates)
        for E, k, value in zip(report.energies, report.quasimomenta, report.integrals)
    ]
    summary = {
        "L": report.L,
        "threshold": report.threshold,
        "size": len(report.candidates),
        "bound_holds": report.bound_holds,
    }
    if args.c1_sweep is not None:
        summary["calibration"] = calibration_sweep(report, _numbers(args.c1_sweep), args.beta)
    return Table(("E", "k", "integral", "resonant", "chosen"), rows, summary)


def _configure_identities(parser):
    _potentials(parser, "mathieu:1.0", "power:1,0.9")
    parser.add_argument("--E", type=_number, default=2.0)
    parser.add_argument("--xmax", type=_number, default=50.0)
    parser.add_argument("--points", type=_integer, default=100)
    parser.add_argument("--identity-tol", type=_number, default=1e-8)
    parser.add_argument("--sequences", type=_integer, default=100)
    parser.add_argument("--max-length", type=_integer, default=200)


@subcommand("identities", "Kernel identity and convolution bound", _configure_identities)
def identities(args, tol):
    V0, V = make_periodic(args.v0), make_decaying(args.v)
    data = floquet_data(V0, args.E, tol)
    K = kernel(V0, V, args.E, args.xmax, tol, data=data)
    phase = wkb_phase(V0, V, args.E, args.xmax, tol, data=data)
    rows = []
    for x in np.linspace(0.0, args.xmax, args.points):
        residual = kernel_identity_residual(K, phase, [x])
        holds = residual <= args.identity_tol
        rows.append(("kernel", float(x), residual, args.identity_tol, holds))

    mismatch = substitution_check(K, phase, (1.0, 0.5), (0.0, args.xmax / 2), tol)
    rows.append(("substitution", 0.0, mismatch, 1e-6, mismatch <= 1e-6))

    rng = np.random.default_rng(args.seed)
    for i in range(args.sequences):
        f = rng.standard_normal(int(rng.integers(1, args.max_length + 1)))
        ratio = convolution_ratio(f)
        rows.append(("convolution", float(i), ratio, YOUNG_CONSTANT, ratio <= YOUNG_CONSTANT))
    summary = {
        "max_kernel_residual": max(row[2] for row in rows if row[0] == "kernel"),
        "substitution_mismatch": mismatch,
        "max_convolution_ratio": max(row[2] for row in rows if row[0] == "convolution"),
        "all_hold": all(row[-1] for row in rows),
    }
    return Table(("identity", "parameter", "value", "bound", "holds"), rows, summary)


# ----------------------------------------------------------------------
# Driver


def _common_arguments(parser):
    parser.add_argument("--config", help="INI file with settings (flags override it)")
    parser.add_argument("--out", default=None, help="Output file (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--seed", type=_integer, default=0)
    parser.add_argument("--threads", type=_integer, default=None, help="Parallelism cap")
    parser.add_argument("--abs-tol", type=_number, default=DEFAULT_TOLERANCE.abs_tol)
    parser.add_argument("--rel-tol", type=_number, default=DEFAULT_TOLERANCE.rel_tol)
    parser.add_argument("--max-steps", type=_integer, default=DEFAULT_TOLERANCE.max_steps)
    parser.add_argument("-v", "--verbose", action="count", default=0)


def make_parser():
    parser = argparse.ArgumentParser(
        prog="spectra", description="Perturbed periodic Schrödinger operators, numerically"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", required=True)
    for name, command in SUBCOMMANDS.items():
        subparser = subparsers.add_parser(name, help=command.help)
        command.configure(subparser)
        _common_arguments(subparser)
        subparser.set_defaults(handler=command.handler)
    return parser, subparsers


def _config_value(action, text):
    """Convert the text of a config setting the way argparse converts the flag."""
    literal = scan_value(text)
    if isinstance(literal, str):
        # Quoted strings lose their quotes, everything else keeps its spelling
        text = literal
    if isinstance(action, argparse._CountAction):
        return _integer(text)
    if action.nargs == 0:
        raise argparse.ArgumentTypeError(f"'{action.dest}' cannot be set in a config file")
    if action.nargs == "+":
        return _descriptors(text)
    value = action.type(text) if action.type is not None else text
    if action.choices is not None and value not in action.choices:
        choices = ", ".join(map(repr, action.choices))
        raise argparse.ArgumentTypeError(f"Expected one of {choices}, got {text!r}")
    return value


def _apply_config(subparser, path):
    options = load_config(path, literal=False)
    actions = {action.dest: action for action in subparser._actions}
    unknown = sorted(set(options) - set(actions) - {"subcommand"})
    if unknown:
        raise ConfigError(unknown[0], 0, f"Unknown setting '{unknown[0]}' in {path}")
    options.pop("subcommand", None)
    defaults = {}
    for name, text in sorted(options.items()):
        try:
            if scan_value(text) is None:
                continue
            defaults[name] = _config_value(actions[name], text)
        except (argparse.ArgumentTypeError, InputError, ValueError) as exc:
            raise ConfigError(name, 0, f"Invalid setting '{name}' in {path}: {exc}")
    subparser.set_defaults(**defaults)


def _settings(args):
    settings = RunConfig()
    for name, value in sorted(vars(args).items()):
        if name in NOT_ECHOED:
            continue
        if isinstance(value, tuple):
            value = list(value)
        settings[name] = value
    return settings


def _write(table, args, settings, fp):
    header = {"tool": "spectra", "version": __version__, "config": settings.canonical()}
    if args.format == "json":
        write_json(fp, table.columns, table.rows, header=header, summary=table.summary)
        return
    comments = [f"spectra {__version__}", f"config: {header['config']}"]
    comments += [f"{name}: {encode(value)}" for name, value in table.summary.items()]
    write_csv(fp, table.columns, table.rows, comments=comments)


@contextmanager
def _thread_cap(threads):
    previous = os.environ.get("SPECTRA_THREADS")
    if threads is not None:
        os.environ["SPECTRA_THREADS"] = str(threads)
    try:
        yield
    finally:
        if threads is not None:
            if previous is None:
                del os.environ["SPECTRA_THREADS"]
            else:
                os.environ["SPECTRA_THREADS"] = previous


def _parse(argv):
    parser, subparsers = make_parser()
    args = parser.parse_args(argv)
    if args.config:
        _apply_config(subparsers.choices[args.subcommand], args.config)
        args = parser.parse_args(argv)
    return args


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return the exit code."""
    try:
        args = _parse(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    except InputError as exc:
        print(f"spectra: error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )

    try:
        tol = Tolerance(args.abs_tol, args.rel_tol, args.max_steps)
        settings = _settings(args)
        with _thread_cap(args.threads):
            log.info("Running %s", args.subcommand)
            table = args.handler(args, tol)
        if args.out is None or args.out == "-":
            _write(table, args, settings, sys.stdout)
        else:
            with Path(args.out).open("w", newline="") as fp:
                _write(table, args, settings, fp)
    except InputError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except ConvergenceError as exc:
        log.error("%s", exc)
        return EXIT_CONVERGENCE
    except OSError as exc:
        log.error("Could not write output: %s", exc)
        return EXIT_INPUT
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
