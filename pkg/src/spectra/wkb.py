"""WKB asymptotics of the perturbed operator

In the Floquet frame of ``H0`` a solution of ``-u'' + (V0 + V) u = E u``
is written as

    (u, u') = [[φ, conj φ], [φ', conj φ']] · diag(e^{ip}, e^{-ip}) · Y,
    p(x)    = -(1/ω) ∫_0^x V |φ|^2.

The reduced vector then solves

    Y' = -[[0, 𝓕], [conj 𝓕, 0]] Y,    𝓕 = w e^{-ih} V,

with ``w`` and ``h`` as in :class:`~spectra.multilinear.OscKernel`. The
solution with ``Y(∞) = (1, 0)`` is the series

    Y = (1 + T_2 + T_4 + ..., T_1 + T_3 + ...),

``T_n`` being the n-fold tail integral of ``𝓕, conj 𝓕, 𝓕, ...`` ending
in ``conj 𝓕``. Its principal term is ``u ~ φ e^{ip}``.

Examples::

    >>> from spectra.potentials import make_decaying, make_periodic
    >>> K = kernel(make_periodic("zero"), make_decaying("power:1,1"), 1.0, 10.0)
    >>> bool(abs(K.w(3.0) - 0.5j) < 1e-10)
    True
    >>> bool(abs(K.h(3.0) - (6.0 - np.log(4.0))) < 1e-10)
    True

"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .exc import DomainError, InputError
from .floquet import FloquetData, band_edges, floquet_data, solve_schrodinger
from .multilinear import OscKernel, conjugate_pattern, nested_tails, staggered_cutoffs
from .numerics import DEFAULT_TOLERANCE, PanelGrid, Tolerance, fit_line, integrate_ode


__all__ = [
    "PhaseReport",
    "SeriesSolution",
    "WKBComparison",
    "WKBPhase",
    "chain",
    "kernel",
    "kernel_identity_residual",
    "phase_monotonicity_check",
    "series_check",
    "series_solution",
    "solve_reduced",
    "substitution_check",
    "wkb_compare",
    "wkb_phase",
]


log = logging.getLogger(__name__)


DEFAULT_N_MAX = 8


def _breakpoints(V0, V, X_max):
    points = set(V0.breakpoints_in(0.0, X_max))
    points.update(b for b in getattr(V, "breakpoints", ()) if 0 < b < X_max)
    return sorted(points)


def _check_length(X_max):
    if not (np.isfinite(X_max) and X_max > 0):
        raise InputError(f"Range must be positive, got {X_max!r}", X_max=X_max)
    return float(X_max)


def _primitive(V0, V, X_max, values, width):
    grid = PanelGrid.build(0.0, X_max, width=width, breakpoints=_breakpoints(V0, V, X_max))
    return grid.antiderivative(values(grid.nodes))


def kernel(
    V0,
    V,
    E: float,
    X_max: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    data: Optional[FloquetData] = None,
    width: float = 0.5,
) -> OscKernel:
    """The kernel ``𝓕 = w e^{-ih} V`` on [0, X_max] at a band-interior ``E``."""
    X_max = _check_length(X_max)
    if data is None:
        data = floquet_data(V0, E, tol)
    correction = _primitive(V0, V, X_max, lambda x: V(x) / data.gamma_prime(x), width)
    return OscKernel(
        data=data,
        V=V,
        X_max=X_max,
        correction=correction,
        breakpoints=tuple(_breakpoints(V0, V, X_max)),
    )


@dataclass(frozen=True)
class WKBPhase:
    """``p(x) = (1 / (2 Im(φ conj φ'))) ∫_0^x V |φ|^2 = -(1/ω) ∫_0^x V |φ|^2``."""

    E: float
    X_max: float
    data: FloquetData = field(repr=False)
    V: Callable = field(repr=False)
    integral: Callable = field(repr=False)

    def __call__(self, x):
        return -self.integral(x) / self.data.omega

    def derivative(self, x):
        return -self.V(x) * np.abs(self.data.phi(x)) ** 2 / self.data.omega


def wkb_phase(
    V0,
    V,
    E: float,
    X_max: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    data: Optional[FloquetData] = None,
    width: float = 0.5,
) -> WKBPhase:
    X_max = _check_length(X_max)
    if data is None:
        data = floquet_data(V0, E, tol)
    integral = _primitive(V0, V, X_max, lambda x: V(x) * np.abs(data.phi(x)) ** 2, width)
    return WKBPhase(E=data.E, X_max=X_max, data=data, V=V, integral=integral)


def kernel_identity_residual(K: OscKernel, phase: WKBPhase, xs) -> float:
    """Largest ``|i V conj(φ)^2 e^{-2ip} / (2 Im(φ conj φ')) + 𝓕|`` over ``xs``.

    The left term is the off-diagonal entry of the system after the two
    substitutions; it equals ``-𝓕`` pointwise.

    """
    xs = np.asarray(xs, dtype=float)
    phi = K.data.phi(xs)
    entry = 1j * K.V(xs) * np.conj(phi) ** 2 * np.exp(-2j * phase(xs)) / (-K.data.omega)
    return float(np.max(np.abs(entry + K(xs))))


def solve_reduced(
    K: OscKernel, y0, x_span: Tuple[float, float], tol: Tolerance = DEFAULT_TOLERANCE
):
    """Integrate ``Y' = -[[0, 𝓕], [conj 𝓕, 0]] Y`` over ``x_span``."""

    def rhs(x, y):
        F = complex(K(x))
        return [-F * y[1], -np.conj(F) * y[0]]

    return integrate_ode(
        rhs, x_span, np.asarray(y0, dtype=complex), tol, breakpoints=K.breakpoints
    )


def chain(phase: WKBPhase, x, Y) -> Tuple[np.ndarray, np.ndarray]:
    """``(u, u')`` from ``Y`` through both substitutions."""
    x = np.asarray(x, dtype=float)
    phi, phi_prime = phase.data.frame(x)
    rotation = np.exp(1j * phase(x))
    first = rotation * Y[0]
    second = np.conj(rotation) * Y[1]
    u = phi * first + np.conj(phi) * second
    uprime = phi_prime * first + np.conj(phi_prime) * second
    return u, uprime


def substitution_check(
    K: OscKernel,
    phase: WKBPhase,
    y0,
    window: Tuple[float, float],
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    points: int = 64,
) -> float:
    """Relative sup-norm mismatch between ``(u, u')`` pushed through the
    substitutions and a direct solve of the original equation.

    ``Y`` solves the reduced system from ``Y(a) = y0``; the direct solve
    starts from the resulting ``(u, u')(a)``.

    """
    a, b = float(window[0]), float(window[1])
    if not 0 <= a < b <= min(K.X_max, phase.X_max):
        raise InputError(f"Window [{a}, {b}] must lie in the kernel range")
    xs = np.linspace(a, b, int(points))
    Y = solve_reduced(K, y0, (a, b), tol)(xs)
    u, uprime = chain(phase, xs, Y)
    V0, V = K.data.V0, K.V

    def potential(x):
        return V0(x) + V(x)

    direct = solve_schrodinger(
        potential,
        K.E,
        (a, b),
        np.array([u[0], uprime[0]], dtype=complex),
        tol,
        breakpoints=_breakpoints(V0, V, b),
    )(xs)
    scale = max(np.max(np.abs(u)), np.max(np.abs(uprime)))
    mismatch = max(np.max(np.abs(direct[0] - u)), np.max(np.abs(direct[1] - uprime)))
    return float(mismatch / scale)


@dataclass(frozen=True)
class SeriesSolution:
    """Partial sums of ``Y(x)`` with ``Y(∞) = (1, 0)``.

    ``terms[n - 1]`` is ``T_n(x)``; ``partial_sums[N]`` is ``Y_N(x)``.
    ``n0`` is the order from which ``|T_n|`` decreases strictly.

    """

    E: float
    x: float
    terms: np.ndarray
    partial_sums: np.ndarray
    spread: float
    converged: bool
    n0: int

    @property
    def value(self):
        return self.partial_sums[-1]

    @property
    def magnitudes(self):
        return np.abs(self.terms)


def _first_decreasing(magnitudes):
    n0 = magnitudes.size
    for n in range(magnitudes.size - 1, 0, -1):
        if magnitudes[n] < magnitudes[n - 1] or magnitudes[n - 1] == 0:
            n0 = n
        else:
            break
    return n0


def _default_cutoffs(V, x):
    support = getattr(V, "support", np.inf)
    if np.isfinite(support):
        start = max(float(support), x) + 1.0
        return [start, 2 * start]
    return [x + 250.0, x + 500.0, x + 1000.0]


def series_solution(
    V0,
    V,
    E: float,
    x: float,
    N_max: int = DEFAULT_N_MAX,
    cutoffs: Optional[Sequence[float]] = None,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    cauchy_tol: float = 1e-6,
    data: Optional[FloquetData] = None,
    width: float = 0.5,
) -> SeriesSolution:
    """Series solution ``Y(x)`` up to order ``N_max``.

    Every ``T_n`` is a tail integral along ``cutoffs`` (by default just
    past the support of ``V``, or ``x + 250, x + 500, x + 1000``); one
    staggered evaluation inside the last rung enters the spread.

    """
    x = float(x)
    N_max = int(N_max)
    if N_max < 1:
        raise InputError(f"N_max must be at least 1, got {N_max}")
    if x < 0:
        raise InputError(f"Point must be non-negative, got {x!r}")
    cutoffs = _default_cutoffs(V, x) if cutoffs is None else [float(y) for y in cutoffs]
    if len(cutoffs) < 2 or cutoffs[0] <= x or any(b <= a for a, b in zip(cutoffs, cutoffs[1:])):
        raise InputError("Need at least two increasing cutoffs beyond x")
    K = kernel(V0, V, E, cutoffs[-1], tol, data=data, width=width)
    by_depth = conjugate_pattern(K, N_max, conjugate_first=True)
    panels = dict(width=width, max_width=width)
    ladder = [np.array(nested_tails(by_depth, x, [y] * N_max, **panels)) for y in cutoffs]
    staggered = np.array(
        nested_tails(by_depth, x, staggered_cutoffs(N_max, cutoffs[-2], cutoffs[-1]), **panels)
    )
    terms = ladder[-1]
    spread = float(max(np.max(np.abs(terms - ladder[-2])), np.max(np.abs(staggered - terms))))
    converged = spread <= cauchy_tol
    if not converged:
        log.warning("Series terms at x=%g not settled: spread %.3g", x, spread)

    partial_sums = np.zeros((N_max + 1, 2), dtype=complex)
    partial_sums[0] = (1.0, 0.0)
    for n, term in enumerate(terms, start=1):
        partial_sums[n] = partial_sums[n - 1]
        partial_sums[n, n % 2] += term
    return SeriesSolution(
        E=K.E,
        x=x,
        terms=terms,
        partial_sums=partial_sums,
        spread=spread,
        converged=bool(converged),
        n0=_first_decreasing(np.abs(terms)),
    )


def series_check(
    V0,
    V,
    E: float,
    x: float,
    N_max: int = DEFAULT_N_MAX,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    data: Optional[FloquetData] = None,
) -> Tuple[SeriesSolution, float]:
    """Series solution at ``x`` and its distance to the reduced system
    integrated backwards from the end of the support of ``V``, where
    ``Y = (1, 0)`` exactly.

    Only compactly supported ``V`` qualify.

    """
    support = float(getattr(V, "support", np.inf))
    if not np.isfinite(support):
        raise InputError("Series check needs a compactly supported potential")
    if data is None:
        data = floquet_data(V0, E, tol)
    series = series_solution(V0, V, E, x, N_max, tol=tol, data=data)
    if x >= support:
        return series, float(np.max(np.abs(series.value - (1.0, 0.0))))
    K = kernel(V0, V, E, support, tol, data=data)
    direct = solve_reduced(K, (1.0, 0.0), (support, float(x)), tol).end
    return series, float(np.max(np.abs(series.value - direct)))


@dataclass(frozen=True)
class WKBComparison:
    """``r(x) = |u_num - φ e^{ip}| / |φ|`` with ``u_num`` matched at ``X_max``.

    ``modulus`` is ``|u_num| / |φ|``; ``tail_max`` the largest ``r`` on
    ``[X_max / 2, X_max]``; ``decay`` the log-log slope of ``r`` on
    ``[X_max / 16, X_max / 2]`` (nan when ``r`` vanishes there).

    """

    E: float
    X_max: float
    x: np.ndarray
    r: np.ndarray
    modulus: np.ndarray
    tail_max: float
    decay: float


def wkb_compare(
    V0,
    V,
    E: float,
    X_max: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    points: int = 200,
    data: Optional[FloquetData] = None,
) -> WKBComparison:
    """Compare the principal WKB term with a direct solution.

    The direct solution is integrated backwards from ``X_max``, where its
    Cauchy data equal those of ``φ e^{ip}``.

    """
    X_max = _check_length(X_max)
    if data is None:
        data = floquet_data(V0, E, tol)
    phase = wkb_phase(V0, V, E, X_max, tol, data=data)
    phi_end, phi_prime_end = data.frame(X_max)
    rotation = np.exp(1j * phase(X_max))

    def potential(x):
        return V0(x) + V(x)

    solution = solve_schrodinger(
        potential,
        data.E,
        (X_max, 0.0),
        np.array([phi_end * rotation, phi_prime_end * rotation], dtype=complex),
        tol,
        breakpoints=_breakpoints(V0, V, X_max),
    )
    xs = np.linspace(0.0, X_max, int(points))
    u_num = solution(xs)[0]
    phi = data.phi(xs)
    modulus_phi = np.abs(phi)
    r = np.abs(u_num - phi * np.exp(1j * phase(xs))) / modulus_phi

    tail_max = float(np.max(r[xs >= X_max / 2]))
    window = (xs >= X_max / 16) & (xs <= X_max / 2) & (r > 0)
    decay = np.nan
    if window.sum() >= 3:
        decay = fit_line(np.log(xs[window]), np.log(r[window]))[0]
    log.info("WKB comparison at E=%g: max r on the upper half %.3g", data.E, tail_max)
    return WKBComparison(
        E=data.E,
        X_max=X_max,
        x=xs,
        r=r,
        modulus=np.abs(u_num) / modulus_phi,
        tail_max=tail_max,
        decay=float(decay),
    )


@dataclass(frozen=True)
class PhaseReport:
    """Finite-difference energy derivatives of ``h(x, E) - h(y, E)``.

    ``slopes[i, j]`` is ``∂_E Δh / (x - y)`` at ``energies[i]`` for the
    pair ``pairs[j]``; ``lower`` is the smallest ``|slopes|`` and
    ``upper[i - 1]`` the largest ``|∂_E^i Δh| / |x - y|``.

    """

    energies: np.ndarray
    pairs: Tuple[Tuple[float, float], ...]
    slopes: np.ndarray
    lower: float
    upper: Tuple[float, float, float]


# Five-point central stencils for the first three derivatives
_STENCILS = (
    (np.array([1, -8, 0, 8, -1]) / 12, 1),
    (np.array([-1, 16, -30, 16, -1]) / 12, 2),
    (np.array([-1, 2, 0, -2, 1]) / 2, 3),
)


def phase_monotonicity_check(
    V0,
    V,
    E_interval: Tuple[float, float],
    x_pairs: Sequence[Tuple[float, float]],
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    n_energies: int = 5,
    steps: Tuple[float, float, float] = (1e-4, 1e-3, 1e-2),
) -> PhaseReport:
    """Lower and upper growth constants of ``∂_E^i [h(x, E) - h(y, E)]``.

    The i-th derivative uses a five-point stencil with step
    ``steps[i - 1]`` times the width of the band containing
    ``E_interval``. Raises :class:`DomainError` when a stencil leaves the
    band.

    """
    lo, hi = float(E_interval[0]), float(E_interval[1])
    if hi < lo:
        raise InputError(f"Invalid energy interval [{lo}, {hi}]")
    pairs = tuple((float(x), float(y)) for x, y in x_pairs)
    if not pairs or any(x == y or min(x, y) < 0 for x, y in pairs):
        raise InputError("Need pairs of distinct non-negative points")
    margin = 1.0 + (hi - lo)
    band = band_edges(V0, (lo - margin, hi + margin), tol).band_containing(0.5 * (lo + hi))
    if band is None or not band[0] < lo <= hi < band[1]:
        raise DomainError(lo, message=f"[{lo}, {hi}] is not inside one band")
    scale = band[1] - band[0]
    X_max = max(max(pair) for pair in pairs)
    xs = np.array([x for x, _ in pairs])
    ys = np.array([y for _, y in pairs])
    lengths = np.abs(xs - ys)

    def delta_h(E):
        K = kernel(V0, V, E, X_max, tol)
        return K.h(xs) - K.h(ys)

    energies = np.linspace(lo, hi, int(n_energies)) if hi > lo else np.array([lo])
    slopes = np.empty((energies.size, len(pairs)))
    upper = [0.0, 0.0, 0.0]
    for i, E in enumerate(energies):
        for weights, order in _STENCILS:
            step = steps[order - 1] * scale
            stencil = E + step * np.arange(-2, 3)
            if not (band[0] < stencil[0] and stencil[-1] < band[1]):
                raise DomainError(E, message=f"Stencil around {E} leaves the band {band}")
            values = np.array([delta_h(e) for e in stencil])
            derivative = weights @ values / step**order
            upper[order - 1] = max(upper[order - 1], float(np.max(np.abs(derivative) / lengths)))
            if order == 1:
                slopes[i] = derivative / (xs - ys)
    return PhaseReport(
        energies=energies,
        pairs=pairs,
        slopes=slopes,
        lower=float(np.min(np.abs(slopes))),
        upper=tuple(upper),
    )
