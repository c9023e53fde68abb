"""Shared numerical contracts

Everything else in the package is built on the handful of primitives
here:

- :func:`integrate_ode` -- adaptive embedded Runge-Kutta integration
  (Dormand-Prince 8(5,3) by default) with dense output, restarted at
  declared breakpoints so piecewise coefficients keep full order.

- :func:`find_root` -- bracketed root finding (Brent).

- :func:`quad` -- adaptive quadrature (QUADPACK), complex integrands
  allowed.

- :class:`PanelGrid` -- composite Gauss-Legendre panels with spectral
  cumulative integration. This is the vectorized workhorse for long and
  oscillatory integrals and for the iterated integrals of the
  multilinear operators.

Examples::

    >>> import math
    >>> tol = Tolerance(abs_tol=1e-12, rel_tol=1e-12)
    >>> solution = integrate_ode(lambda x, y: y, (0.0, 1.0), [1.0], tol)
    >>> bool(abs(solution(1.0)[0] - math.e) < 1e-9)
    True
    >>> abs(find_root(lambda x: x * x - 2, (1.0, 2.0)) - math.sqrt(2)) < 1e-10
    True
    >>> round(quad(lambda x: x, (0.0, 1.0)), 12)
    0.5

"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate, optimize, stats

from .exc import ConvergenceError, InputError, StepLimitError


__all__ = [
    "DEFAULT_TOLERANCE",
    "DenseSolution",
    "EnvelopeFit",
    "Grid",
    "PanelGrid",
    "Tolerance",
    "find_root",
    "fit_envelope",
    "fit_line",
    "integrate_ode",
    "parallel_map",
    "quad",
]


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise InputError("Tolerances must be non-negative")
        if self.abs_tol + self.rel_tol <= 0:
            raise InputError("At least one of abs_tol and rel_tol must be positive")
        if int(self.max_steps) < 1:
            raise InputError("max_steps must be at least 1")

    def scaled(self, factor):
        """Return a copy with both tolerances multiplied by ``factor``."""
        return Tolerance(self.abs_tol * factor, self.rel_tol * factor, self.max_steps)


DEFAULT_TOLERANCE = Tolerance()


@dataclass(frozen=True)
class Grid:
    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 1 or points.size < 2:
            raise InputError("A grid needs at least two points")
        if not np.all(np.isfinite(points)):
            raise InputError("Grid points must be finite")
        if not np.all(np.diff(points) > 0):
            raise InputError("Grid points must be strictly increasing")
        points.flags.writeable = False
        object.__setattr__(self, "points", points)

    @classmethod
    def uniform(cls, a, b, n):
        return cls(np.linspace(a, b, int(n)))

    @classmethod
    def per_unit(cls, a, b, density):
        """Uniform grid with at least ``density`` points per unit length."""
        n = max(2, int(np.ceil((b - a) * density)) + 1)
        return cls(np.linspace(a, b, n))

    @classmethod
    def geometric(cls, a, b, n):
        return cls(np.geomspace(a, b, int(n)))

    def __len__(self):
        return self.points.size

    def __iter__(self):
        return iter(self.points)

    @property
    def span(self):
        return float(self.points[0]), float(self.points[-1])


def _check_finite(name, value):
    if not np.all(np.isfinite(value)):
        raise InputError(f"Non-finite {name}: {value!r}")


def _split_span(x0, x1, breakpoints):
    """Split [x0, x1] (either orientation) at interior breakpoints."""
    lo, hi = min(x0, x1), max(x0, x1)
    cuts = sorted({float(b) for b in breakpoints if lo < b < hi})
    nodes = [x0] + (cuts if x1 > x0 else cuts[::-1]) + [x1]
    return list(zip(nodes[:-1], nodes[1:]))


@dataclass(frozen=True)
class _Piece:
    lo: float
    hi: float
    ts: np.ndarray
    ys: np.ndarray
    interpolant: integrate.OdeSolution


@dataclass(frozen=True)
class DenseSolution:
    """Dense output of :func:`integrate_ode`.

    Calling the solution with a scalar returns the state vector; calling
    it with an array of points returns an array of shape ``(n_y, n)``
    (the :class:`scipy.integrate.OdeSolution` convention). At the
    accepted step endpoints the stored step results are returned as is.

    """

    x_span: Tuple[float, float]
    pieces: Tuple[_Piece, ...]
    n_steps: int
    n_evaluations: int
    dtype: np.dtype = field(default=np.dtype(float))

    @property
    def ts(self):
        """All accepted step endpoints in integration order."""
        return np.concatenate([self.pieces[0].ts[:1]] + [p.ts[1:] for p in self.pieces])

    @property
    def ys(self):
        return np.concatenate(
            [self.pieces[0].ys[:, :1]] + [p.ys[:, 1:] for p in self.pieces], axis=1
        )

    @property
    def end(self):
        return self.pieces[-1].ys[:, -1].copy()

    @cached_property
    def interpolant(self):
        """All pieces merged into one :class:`scipy.integrate.OdeSolution`.

        Cheaper than calling the solution for scalar arguments; does not
        apply the exact-endpoint substitution.

        """
        ts = self.ts
        interpolants = [i for piece in self.pieces for i in piece.interpolant.interpolants]
        return integrate.OdeSolution(ts, interpolants)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xs = np.atleast_1d(x)
        lo, hi = min(self.x_span), max(self.x_span)
        if np.any(xs < lo) or np.any(xs > hi):
            raise InputError(f"Evaluation point outside the solution span [{lo}, {hi}]")
        n_y = self.pieces[0].ys.shape[0]
        out = np.empty((n_y, xs.size), dtype=self.dtype)
        todo = np.ones(xs.size, dtype=bool)
        for piece in self.pieces:
            mask = todo & (xs >= piece.lo) & (xs <= piece.hi)
            if not mask.any():
                continue
            values = piece.interpolant(xs[mask])
            # Exact step results at step endpoints
            order = np.argsort(piece.ts)
            sorted_ts = piece.ts[order]
            index = np.clip(np.searchsorted(sorted_ts, xs[mask]), 0, sorted_ts.size - 1)
            exact = sorted_ts[index] == xs[mask]
            if exact.any():
                values[:, exact] = piece.ys[:, order[index[exact]]]
            out[:, mask] = values
            todo &= ~mask
        return out[:, 0] if scalar else out


def integrate_ode(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    x_span: Tuple[float, float],
    y0: Sequence,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    breakpoints: Iterable[float] = (),
    method: str = "DOP853",
    max_step: float = np.inf,
) -> DenseSolution:
    """Integrate ``y' = rhs(x, y)`` over ``x_span`` with dense output.

    ``x_span`` may run backwards. Steps are restarted at every breakpoint
    strictly inside the span, so coefficients that jump there (piecewise
    potentials, truncation points) do not degrade the order.

    Raises :class:`StepLimitError` (with the last reached x) when the
    step budget ``tol.max_steps`` is exhausted and :class:`InputError`
    when the right hand side produces a non-finite value.

    Examples::

        >>> import math
        >>> sol = integrate_ode(lambda x, y: [y[1], -y[0]], (0, math.pi / 2), [0.0, 1.0])
        >>> bool(abs(sol(math.pi / 2)[0] - 1) < 1e-9)
        True
        >>> float(integrate_ode(lambda x, y: [0.0], (0, 3), [2.5])(1.7)[0])
        2.5

    """
    x0, x1 = float(x_span[0]), float(x_span[1])
    _check_finite("integration span", [x0, x1])
    if x0 == x1:
        raise InputError("Empty integration span")
    y = np.array(y0, dtype=complex if np.iscomplexobj(y0) else float)
    _check_finite("initial state", y)
    solver_class = {"DOP853": integrate.DOP853, "RK45": integrate.RK45}[method]

    def fun(x, state):
        value = np.asarray(rhs(x, state), dtype=y.dtype)
        if not np.all(np.isfinite(value)):
            raise InputError(f"Non-finite right hand side at x = {x!r}")
        return value

    pieces = []
    n_steps = 0
    n_evaluations = 0
    for lo, hi in _split_span(x0, x1, breakpoints):
        solver = solver_class(
            fun,
            lo,
            y,
            hi,
            rtol=max(tol.rel_tol, 100 * np.finfo(float).eps),
            atol=tol.abs_tol,
            max_step=max_step,
        )
        ts = [lo]
        ys = [y.copy()]
        interpolants = []
        while solver.status == "running":
            if n_steps >= tol.max_steps:
                raise StepLimitError(ts[-1], tol.max_steps)
            message = solver.step()
            if solver.status == "failed":
                raise ConvergenceError(f"Integration failed at x = {solver.t!r}: {message}")
            n_steps += 1
            ts.append(solver.t)
            ys.append(solver.y.copy())
            interpolants.append(solver.dense_output())
        n_evaluations += solver.nfev
        ts = np.array(ts)
        ys = np.array(ys).T
        pieces.append(
            _Piece(
                lo=min(lo, hi),
                hi=max(lo, hi),
                ts=ts,
                ys=ys,
                interpolant=integrate.OdeSolution(ts, interpolants),
            )
        )
        y = ys[:, -1].copy()
    log.debug("Integrated over [%g, %g] in %d steps", x0, x1, n_steps)
    return DenseSolution(
        x_span=(x0, x1),
        pieces=tuple(pieces),
        n_steps=n_steps,
        n_evaluations=n_evaluations,
        dtype=y.dtype,
    )


def find_root(
    f: Callable[[float], float],
    bracket: Tuple[float, float],
    tol: Tolerance = DEFAULT_TOLERANCE,
) -> float:
    """Find a root of ``f`` in ``bracket`` by Brent's method.

    Examples::

        >>> abs(find_root(lambda x: x, (-1.0, 1.0))) < 1e-10
        True

    """
    a, b = float(bracket[0]), float(bracket[1])
    fa, fb = f(a), f(b)
    _check_finite("function value at bracket end", [fa, fb])
    if fa == 0:
        return a
    if fb == 0:
        return b
    if fa * fb > 0:
        raise InputError(f"Interval [{a}, {b}] does not bracket a root", bracket=(a, b))
    xtol = tol.abs_tol if tol.abs_tol > 0 else 1e-300
    rtol = max(tol.rel_tol, 4 * np.finfo(float).eps)
    maxiter = int(min(tol.max_steps, 10_000))
    try:
        return optimize.brentq(f, a, b, xtol=xtol, rtol=rtol, maxiter=maxiter)
    except RuntimeError as exc:
        raise ConvergenceError(str(exc))


def quad(
    f: Callable[[float], float],
    interval: Tuple[float, float],
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    points: Optional[Sequence[float]] = None,
):
    """Adaptive quadrature of a real or complex integrand.

    Breakpoints passed as ``points`` are honoured. Long intervals are
    split into panels of length at most 50 before handing them to
    QUADPACK, which keeps its subdivision budget sufficient for
    oscillatory integrands.

    Examples::

        >>> import math
        >>> abs(quad(math.sin, (0.0, 2 * math.pi))) < 1e-12
        True

    """
    a, b = float(interval[0]), float(interval[1])
    _check_finite("integration interval", [a, b])
    if a == b:
        return 0.0
    if b < a:
        return -quad(f, (b, a), tol, points=points)

    def checked(x):
        value = f(x)
        if not np.isfinite(value):
            raise InputError(f"Non-finite integrand at x = {x!r}")
        return value

    cuts = {a, b}
    cuts.update(float(p) for p in (points or ()) if a < p < b)
    n_panels = int(np.ceil((b - a) / 50.0))
    cuts.update(np.linspace(a, b, n_panels + 1)[1:-1].tolist())
    cuts = sorted(cuts)
    limit = int(min(tol.max_steps, 500))

    def real_part(part):
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            value, _ = integrate.quad(
                lambda x: part(checked(x)),
                lo,
                hi,
                epsabs=tol.abs_tol / len(cuts),
                epsrel=tol.rel_tol,
                limit=limit,
            )
            total += value
        return total

    probe = f(0.5 * (a + b))
    if np.iscomplexobj(probe):
        return real_part(np.real) + 1j * real_part(np.imag)
    return real_part(float)


# Points per Vandermonde block in PanelGrid.antiderivative
_CHUNK = 1 << 16


class PanelGrid:
    """Composite Gauss-Legendre panels on ``[edges[0], edges[-1]]``.

    Each panel carries ``order`` interior Gauss nodes; since no node sits
    on a panel edge, functions with jumps at edges are integrated with
    full accuracy. Values are passed around as flat arrays aligned with
    :attr:`nodes`.

    Examples::

        >>> grid = PanelGrid.build(0.0, 3.0, width=1.0)
        >>> round(float(grid.integrate(grid.nodes ** 2)), 12)
        9.0
        >>> cumulative = grid.antiderivative(np.ones_like(grid.nodes))
        >>> round(float(cumulative(2.5)), 12)
        2.5

    """

    def __init__(self, edges, order=16):
        edges = np.asarray(edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or not np.all(np.diff(edges) > 0):
            raise InputError("Panel edges must be strictly increasing")
        self.edges = edges
        self.order = order = int(order)
        reference_nodes, reference_weights = legendre.leggauss(order)
        self.widths = np.diff(edges)
        half = 0.5 * self.widths[:, None]
        centers = 0.5 * (edges[:-1] + edges[1:])[:, None]
        self.nodes = (centers + half * reference_nodes[None, :]).ravel()
        self.weights = (half * reference_weights[None, :]).ravel()
        # Maps nodal values to the Legendre coefficients of the local
        # antiderivative (vanishing at the left panel edge) on [-1, 1].
        vandermonde = legendre.legvander(reference_nodes, order - 1)
        to_coefficients = np.linalg.inv(vandermonde)
        integral = np.zeros((order + 1, order))
        for j in range(order):
            unit = np.zeros(order)
            unit[j] = 1.0
            integral[:, j] = legendre.legint(unit, lbnd=-1)
        self._antiderivative_matrix = integral @ to_coefficients
        self._cumulative_matrix = (
            legendre.legvander(reference_nodes, order) @ self._antiderivative_matrix
        )

    @classmethod
    def build(cls, a, b, *, width=1.0, breakpoints=(), order=16):
        """Panels of length at most ``width`` with edges at every breakpoint."""
        a, b = float(a), float(b)
        if not b > a:
            raise InputError(f"Empty panel range [{a}, {b}]")
        cuts = sorted({a, b} | {float(p) for p in breakpoints if a < p < b})
        edges = [a]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            n = max(1, int(np.ceil((hi - lo) / width - 1e-12)))
            edges.extend(np.linspace(lo, hi, n + 1)[1:].tolist())
        return cls(edges, order=order)

    @classmethod
    def graded(cls, a, b, *, width=0.5, max_width=2.0, breakpoints=(), order=16):
        """Panels no longer than ``min(width * (1 + x), max_width)``.

        Suited to integrands decaying like a power of ``1 + x`` whose
        oscillation period stays above ``max_width``.

            >>> grid = PanelGrid.graded(0.0, 100.0, breakpoints=[50.0])
            >>> 50.0 in grid.edges, float(grid.widths.max()) <= 2.0
            (True, True)

        """
        a, b = float(a), float(b)
        if not b > a:
            raise InputError(f"Empty panel range [{a}, {b}]")
        cuts = sorted({a, b} | {float(p) for p in breakpoints if a < p < b})
        edges = [a]
        for hi in cuts[1:]:
            while edges[-1] < hi:
                x = edges[-1]
                step = min(width * (1 + abs(x)), max_width)
                if x + step >= hi:
                    edges.append(hi)
                elif x + 2 * step > hi:
                    edges.append(0.5 * (x + hi))
                else:
                    edges.append(x + step)
        return cls(edges, order=order)

    @property
    def n_panels(self):
        return self.widths.size

    @property
    def span(self):
        return float(self.edges[0]), float(self.edges[-1])

    def evaluate(self, f):
        """Evaluate a vectorized callable at the nodes."""
        values = np.asarray(f(self.nodes))
        if values.shape != self.nodes.shape:
            values = np.broadcast_to(values, self.nodes.shape).copy()
        return values

    def integrate(self, values):
        return np.dot(self.weights, values)

    def panel_integrals(self, values):
        values = np.asarray(values).reshape(self.n_panels, self.order)
        return (values * self.weights.reshape(self.n_panels, self.order)).sum(axis=1)

    def edge_values(self, values):
        """Cumulative integral at every panel edge, starting from 0."""
        totals = self.panel_integrals(values)
        return np.concatenate([[0.0], np.cumsum(totals)])

    def cumulative(self, values):
        """Cumulative integral from the left end, at every node."""
        values = np.asarray(values).reshape(self.n_panels, self.order)
        local = values @ self._cumulative_matrix.T * (0.5 * self.widths[:, None])
        offsets = self.edge_values(values.ravel())[:-1]
        return (local + offsets[:, None]).ravel()

    def antiderivative(self, values):
        """Callable evaluating the cumulative integral at arbitrary points."""
        values = np.asarray(values).reshape(self.n_panels, self.order)
        coefficients = values @ self._antiderivative_matrix.T * (0.5 * self.widths[:, None])
        offsets = self.edge_values(values.ravel())
        edges = self.edges

        def evaluate(x):
            x = np.asarray(x, dtype=float)
            xs = np.atleast_1d(x)
            if np.any(xs < edges[0] - 1e-12) or np.any(xs > edges[-1] + 1e-12):
                raise InputError("Evaluation point outside the panel range")
            index = np.clip(np.searchsorted(edges, xs, side="right") - 1, 0, edges.size - 2)
            t = np.clip(2 * (xs - edges[index]) / (edges[index + 1] - edges[index]) - 1, -1, 1)
            result = np.empty(xs.size, dtype=coefficients.dtype)
            for start in range(0, xs.size, _CHUNK):
                chunk = slice(start, start + _CHUNK)
                basis = legendre.legvander(t[chunk], coefficients.shape[1] - 1)
                result[chunk] = np.einsum("ij,ij->i", basis, coefficients[index[chunk]])
            result += offsets[index]
            return result[0] if x.ndim == 0 else result

        return evaluate


def fit_line(x, y):
    """Least-squares line ``y = intercept + slope * x``.

    Returns ``(slope, intercept, r_squared)``.

        >>> slope, intercept, r2 = fit_line([0, 1, 2], [1, 3, 5])
        >>> round(slope, 12), round(intercept, 12), round(r2, 12)
        (2.0, 1.0, 1.0)

    """
    result = stats.linregress(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return float(result.slope), float(result.intercept), float(result.rvalue**2)


@dataclass(frozen=True)
class EnvelopeFit:
    slope: float
    intercept: float
    r_squared: float
    envelope_intercept: float

    def __call__(self, x):
        return self.envelope_intercept + self.slope * np.asarray(x, dtype=float)


def fit_envelope(x, y) -> EnvelopeFit:
    """Least-squares line plus the smallest upward shift covering every point.

    ``envelope_intercept`` is the intercept of the parallel line lying on
    or above all ``(x, y)``; bound checks over sweeps use it as the fitted
    constant of an affine upper bound.

        >>> fit = fit_envelope([0, 1, 2], [0, 2, 1])
        >>> round(fit.slope, 12), round(fit.envelope_intercept, 12)
        (0.5, 1.5)

    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept, r_squared = fit_line(x, y)
    shift = float(np.max(y - (intercept + slope * x)))
    return EnvelopeFit(slope, intercept, r_squared, intercept + max(shift, 0.0))


def thread_count():
    """Parallelism cap from ``SPECTRA_THREADS`` (default 1)."""
    raw = os.environ.get("SPECTRA_THREADS", "1")
    try:
        count = int(raw)
    except ValueError:
        raise InputError(f"SPECTRA_THREADS must be an integer, got {raw!r}")
    return max(1, count)


def parallel_map(fn: Callable, items: Iterable, threads: Optional[int] = None) -> List:
    """Map ``fn`` over ``items``, preserving order.

    Runs sequentially unless more than one thread is allowed.

    """
    items = list(items)
    threads = thread_count() if threads is None else max(1, int(threads))
    if threads == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, items))
