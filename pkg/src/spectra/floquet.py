"""Band theory of the periodic operator ``H0 = -D^2 + V0``

The monodromy ``Q(E)`` transfers ``(u, u')`` over one period; its trace
is the discriminant ``Δ(E)``, and the band spectrum is the set where
``|Δ(E)| < 2``. Inside a band the Floquet multipliers are ``e^{±ik}``
with quasimomentum ``k ∈ (0, π)``, and the Floquet solution ``φ(x, E)``
is normalized so that ``|φ(0)| = 1`` and ``Im(conj(φ) φ') = ω/2 > 0``.

Examples::

    >>> v0 = make_periodic("zero")
    >>> round(discriminant(v0, 4.0), 8)
    -0.83229367
    >>> data = floquet_data(v0, 1.0)
    >>> round(data.k, 8), round(data.omega, 8)
    (1.0, 2.0)
    >>> round(float(gamma_prime(data, 0.3)), 8)
    1.0

"""
import functools
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Tuple

import numpy as np
from scipy import optimize

from .exc import ConvergenceError, DomainError, InputError
from .numerics import DEFAULT_TOLERANCE, DenseSolution, Tolerance, find_root, integrate_ode, quad
from .potentials import PeriodicPotential, make_periodic  # noqa: F401 (doctests)


__all__ = [
    "BandStructure",
    "FloquetData",
    "Monodromy",
    "band_edges",
    "capital_gamma",
    "complex_quasimomentum",
    "discriminant",
    "enclosing_band",
    "floquet_data",
    "gamma_prime",
    "gamma_prime_bounds",
    "half_band_energy",
    "monodromy",
    "quasimomentum",
    "quasimomentum_slope",
    "solve_schrodinger",
]


log = logging.getLogger(__name__)


# Fraction of the band width
DEFAULT_EDGE_MARGIN = 1e-6


def solve_schrodinger(
    potential: Callable,
    z,
    x_span: Tuple[float, float],
    y0,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    breakpoints: Iterable[float] = (),
) -> DenseSolution:
    """Solve ``-u'' + potential(x) u = z u`` for ``(u, u')`` over ``x_span``.

    ``z`` and ``y0`` may be complex. The span may run backwards.

        >>> import math
        >>> sol = solve_schrodinger(lambda x: 0.0, 1.0, (0, math.pi / 2), [0.0, 1.0])
        >>> bool(abs(sol(math.pi / 2)[0] - 1) < 1e-9)
        True

    """
    complex_run = np.iscomplexobj(y0) or np.iscomplexobj(z)
    y0 = np.asarray(y0, dtype=complex if complex_run else float)

    def rhs(x, y):
        return [y[1], (potential(x) - z) * y[0]]

    return integrate_ode(rhs, x_span, y0, tol, breakpoints=breakpoints)


@dataclass(frozen=True)
class Monodromy:
    """Transfer matrix of ``(u, u')`` over one period at energy ``E``."""

    matrix: np.ndarray
    E: complex

    @property
    def trace(self):
        return self.matrix[0, 0] + self.matrix[1, 1]

    @property
    def det(self):
        return np.linalg.det(self.matrix)


def monodromy(V0: PeriodicPotential, E, tol: Tolerance = DEFAULT_TOLERANCE) -> Monodromy:
    """Monodromy ``Q(E)``; columns are ``(u, u')(1)`` for ``(1, 0)`` and ``(0, 1)``.

    ``E`` may be complex, in which case ``Q`` is complex.

        >>> q = monodromy(make_periodic("zero"), 0.0).matrix
        >>> np.round(q, 12).tolist()
        [[1.0, 1.0], [0.0, 1.0]]

    """
    if not np.isfinite(E):
        raise InputError(f"Energy must be finite, got {E!r}", energy=E)
    dtype = complex if np.iscomplexobj(E) else float

    def rhs(x, y):
        c = V0(x) - E
        return [y[1], c * y[0], y[3], c * y[2]]

    solution = integrate_ode(
        rhs, (0.0, 1.0), np.array([1, 0, 0, 1], dtype=dtype), tol, breakpoints=V0.breakpoints
    )
    end = solution.end
    matrix = np.array([[end[0], end[2]], [end[1], end[3]]])
    return Monodromy(matrix=matrix, E=E)


def discriminant(V0: PeriodicPotential, E, tol: Tolerance = DEFAULT_TOLERANCE):
    """``Δ(E) = Tr Q(E)``."""
    trace = monodromy(V0, E, tol).trace
    return complex(trace) if np.iscomplexobj(trace) else float(trace)


def quasimomentum(V0: PeriodicPotential, E, tol: Tolerance = DEFAULT_TOLERANCE):
    """``k(E) = arccos(Δ(E)/2)`` for ``E`` in a band interior."""
    delta = discriminant(V0, E, tol)
    if not abs(delta) < 2:
        raise DomainError(E, delta)
    return float(np.arccos(delta / 2))


@dataclass(frozen=True)
class BandStructure:
    bands: Tuple[Tuple[float, float], ...]
    window: Tuple[float, float]

    def __len__(self):
        return len(self.bands)

    def __iter__(self):
        return iter(self.bands)

    def band_containing(self, E):
        """The band ``(a, b)`` with ``a < E < b``, or None."""
        for a, b in self.bands:
            if a < E < b:
                return (a, b)
        return None

    def gaps(self):
        return tuple(
            (b, a) for (_, b), (a, _) in zip(self.bands[:-1], self.bands[1:]) if a > b
        )


def _touching_extremum(f, lo, hi, sign, tol):
    """Locate the extremum of ``sign * f`` on [lo, hi]; return (x, value)."""
    result = optimize.minimize_scalar(
        lambda E: -sign * f(E),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": max(tol.abs_tol, 1e-12)},
    )
    return float(result.x), float(-result.fun)


def band_edges(
    V0: PeriodicPotential,
    window: Tuple[float, float],
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    step: float = 0.05,
    closed_gap_tol: float = 1e-8,
) -> BandStructure:
    """Bands of ``H0`` inside ``window``.

    ``Δ(E) ∓ 2`` is scanned with spacing ``step``; every sign change is
    refined by Brent's method. Where ``|Δ|`` has a local maximum just
    below 2 between scan points, the maximum is located and, if it
    exceeds 2 by more than ``closed_gap_tol``, the narrow gap it hides
    is split out. Bands are clipped to the window.

    """
    lo, hi = float(window[0]), float(window[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or not hi > lo:
        raise InputError(f"Invalid energy window [{lo}, {hi}]", window=window)
    if V0.is_zero:
        # No gaps: the free spectrum is [0, inf)
        bands = ((max(lo, 0.0), hi),) if hi > 0 else ()
        return BandStructure(bands=bands, window=(lo, hi))

    def delta(E):
        return discriminant(V0, E, tol)

    n = max(2, int(np.ceil((hi - lo) / step)) + 1)
    energies = np.linspace(lo, hi, n)
    values = np.array([delta(E) for E in energies])
    log.debug("Scanned the discriminant at %d energies on [%g, %g]", n, lo, hi)

    edges = set()
    for sign in (1, -1):
        shifted = sign * values - 2

        def crossing(E, sign=sign):
            return sign * delta(E) - 2

        for i in range(n - 1):
            a, b = energies[i], energies[i + 1]
            fa, fb = shifted[i], shifted[i + 1]
            if fa == 0:
                edges.add(float(a))
            if fa * fb < 0:
                edges.add(find_root(crossing, (a, b), tol))
            elif fa < 0 and fb < 0 and 0 < i < n - 1:
                # Interior local maximum of sign * Δ close to 2
                left, right = shifted[i - 1], shifted[i + 1]
                if fa > left and fa >= right and fa > -0.5:
                    peak, value = _touching_extremum(delta, energies[i - 1], b, sign, tol)
                    if value - 2 > closed_gap_tol:
                        edges.add(find_root(crossing, (energies[i - 1], peak), tol))
                        edges.add(find_root(crossing, (peak, b), tol))
        if shifted[-1] == 0:
            edges.add(float(hi))

    cuts = sorted({lo, hi} | {e for e in edges if lo < e < hi})
    bands = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if abs(delta(0.5 * (a + b))) < 2:
            if bands and bands[-1][1] == a:
                bands[-1] = (bands[-1][0], b)
            else:
                bands.append((a, b))
    log.debug("Found %d bands in [%g, %g]", len(bands), lo, hi)
    return BandStructure(bands=tuple(bands), window=(lo, hi))


@functools.lru_cache(maxsize=128)
def _bands_near(V0, tol, lo, hi):
    return band_edges(V0, (lo, hi), tol, step=(hi - lo) / 192)


def enclosing_band(
    V0: PeriodicPotential, E: float, tol: Tolerance = DEFAULT_TOLERANCE
) -> Optional[Tuple[float, float]]:
    """The band ``(a, b)`` with ``a < E < b``, or None.

    For the zero potential the bands are the intervals between
    consecutive ``(nπ)^2``, where the quasimomentum reaches 0 or π.

        >>> a, b = enclosing_band(make_periodic("zero"), 20.0)
        >>> round(a / np.pi**2, 12), round(b / np.pi**2, 12)
        (1.0, 4.0)

    """
    E = float(E)
    if V0.is_zero:
        if not E > 0:
            return None
        n = np.floor(np.sqrt(E) / np.pi)
        return (float((n * np.pi) ** 2), float(((n + 1) * np.pi) ** 2))
    # Windows sit on a grid so that nearby energies share a cached scan
    width = 4.0
    for _ in range(24):
        lo = (np.floor(E / width) - 1) * width
        hi = lo + 3 * width
        band = _bands_near(V0, tol, float(lo), float(hi)).band_containing(E)
        if band is None or lo < band[0] and band[1] < hi:
            return band
        width *= 2
    raise ConvergenceError(f"No band edges found around E={E!r}")


@dataclass(frozen=True)
class FloquetData:
    """Floquet data of ``H0`` at a band-interior energy ``E``.

    ``phi`` and ``gamma`` are evaluated from a dense solution on one
    period: ``φ(x + n) = multiplier**n φ(x)`` and
    ``γ(x + n) = γ(x) + n * gamma_increment``.

    """

    E: float
    k: float
    omega: float
    multiplier: complex
    J0: complex
    discriminant: float
    gamma_increment: float
    V0: PeriodicPotential = field(repr=False)
    solution: DenseSolution = field(repr=False)

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        n = np.floor(x)
        return n, np.clip(x - n, 0.0, 1.0)

    def _frame(self, x):
        n, t = self._split(x)
        values = self.solution(t)
        scale = self.multiplier**n
        return scale * values[0], scale * values[1], values[2].real + n * self.gamma_increment

    def phi(self, x):
        return self._frame(x)[0]

    def phi_prime(self, x):
        return self._frame(x)[1]

    def frame(self, x):
        """``(φ, φ')`` at ``x``."""
        phi, phi_prime, _ = self._frame(x)
        return phi, phi_prime

    def gamma(self, x):
        return self._frame(x)[2]

    def gamma_prime(self, x):
        if np.ndim(x) == 0:
            # |φ| is 1-periodic; scalar calls come from ODE right hand sides
            value = self.solution.interpolant(x - np.floor(x))[0]
            return self.omega / (2 * abs(value) ** 2)
        return self.omega / (2 * np.abs(self.phi(x)) ** 2)


def floquet_data(
    V0: PeriodicPotential,
    E: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    edge_margin: float = DEFAULT_EDGE_MARGIN,
    bands: Optional[BandStructure] = None,
) -> FloquetData:
    """Floquet solution, quasimomentum, Wronskian and phase at ``E``.

    ``E`` must lie in a band ``(a, b)`` with
    ``min(E - a, b - E) > edge_margin * (b - a)``, otherwise
    :class:`DomainError` is raised. The band is looked up in ``bands``
    when given (bands clipped by its window count as ending there) and
    located with :func:`band_edges` otherwise.

    """
    E = float(E)
    Q = monodromy(V0, E, tol)
    delta = float(Q.trace)
    if not abs(delta) < 2:
        raise DomainError(E, delta)
    band = enclosing_band(V0, E, tol) if bands is None else bands.band_containing(E)
    if band is None or not min(E - band[0], band[1] - E) > edge_margin * (band[1] - band[0]):
        raise DomainError(E, delta)
    k = float(np.arccos(delta / 2))

    matrix = Q.matrix
    multiplier = np.exp(1j * k)
    candidates = (
        np.array([matrix[0, 1], multiplier - matrix[0, 0]]),
        np.array([multiplier - matrix[1, 1], matrix[1, 0]]),
    )
    v = max(candidates, key=lambda c: np.linalg.norm(c))
    if np.imag(np.conj(v[0]) * v[1]) < 0:
        multiplier = np.conj(multiplier)
        v = np.conj(v)
    # |φ(0)| = 1 and φ(0) real
    v = v / v[0]
    omega = float(2 * np.imag(np.conj(v[0]) * v[1]))

    def rhs(x, y):
        return [y[1], (V0(x) - E) * y[0], omega / (2 * abs(y[0]) ** 2)]

    y0 = np.array([v[0], v[1], np.angle(v[0])], dtype=complex)
    solution = integrate_ode(rhs, (0.0, 1.0), y0, tol, breakpoints=V0.breakpoints)
    increment = float(solution.end[2].real - y0[2].real)
    # Snap to the argument of the multiplier so γ and Arg φ agree over many periods
    increment += float(np.angle(multiplier * np.exp(-1j * increment)))
    log.debug("Floquet data at E=%g: k=%.12g, omega=%.12g", E, k, omega)
    return FloquetData(
        E=E,
        k=k,
        omega=omega,
        multiplier=complex(multiplier),
        J0=complex(v[0]),
        discriminant=delta,
        gamma_increment=increment,
        V0=V0,
        solution=solution,
    )


def gamma_prime(data: FloquetData, x):
    """``γ'(x, E) = ω / (2 |φ(x, E)|^2)``."""
    return data.gamma_prime(x)


def gamma_prime_bounds(data: FloquetData, samples: int = 513) -> Tuple[float, float]:
    """Smallest and largest ``γ'`` over one period, sampled on a uniform grid.

    These are the empirical constants ``1/C <= γ' <= C`` at ``E``.

        >>> lo, hi = gamma_prime_bounds(floquet_data(make_periodic("zero"), 4.0))
        >>> round(lo, 8), round(hi, 8)
        (2.0, 2.0)

    """
    if samples < 2:
        raise InputError(f"Need at least two samples, got {samples}")
    values = data.gamma_prime(np.linspace(0.0, 1.0, samples))
    return float(np.min(values)), float(np.max(values))


def capital_gamma(data: FloquetData, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """``Γ(E) = ∫_0^1 γ'(x, E)^-2 dx``.

        >>> round(capital_gamma(floquet_data(make_periodic("zero"), 4.0)), 8)
        0.25

    """
    value = quad(
        lambda x: float(data.gamma_prime(x)) ** -2,
        (0.0, 1.0),
        tol,
        points=data.V0.breakpoints,
    )
    return float(value)


def complex_quasimomentum(V0: PeriodicPotential, z, tol: Tolerance = DEFAULT_TOLERANCE):
    """``(k, τ)`` with ``2 cos(k + iτ) = Tr Q(z)`` and ``k ∈ [0, π]``.

        >>> k, tau = complex_quasimomentum(make_periodic("zero"), 1 + 0.1j)
        >>> abs(complex(k, tau) - (1 + 0.1j) ** 0.5) < 1e-8
        True

    """
    delta = complex(monodromy(V0, complex(z), tol).trace)
    value = np.arccos(delta / 2)
    return float(value.real), float(value.imag)


def half_band_energy(
    V0: PeriodicPotential, band: Tuple[float, float], tol: Tolerance = DEFAULT_TOLERANCE
) -> float:
    """The energy ``c_n`` in ``band`` with ``k(c_n) = π/2``, i.e. ``Δ(c_n) = 0``."""
    a, b = band
    return find_root(lambda E: discriminant(V0, E, tol), (a, b), tol)


def quasimomentum_slope(
    V0: PeriodicPotential, E: float, tol: Tolerance = DEFAULT_TOLERANCE, *, step: float = 1e-5
) -> float:
    """``dk/dE`` by central difference."""
    h = step * max(1.0, abs(E))
    return (quasimomentum(V0, E + h, tol) - quasimomentum(V0, E - h, tol)) / (2 * h)
