"""Generalized Prüfer variables

A real solution ``u`` of ``-u'' + (V0 + V) u = E u`` is written in the
Floquet frame of ``H0`` as ``(u, u') = Im(ρ (φ, φ'))`` with

    ρ = (2/ω) (u' conj(φ) - u conj(φ')),    R = |ρ|,    θ = γ + Arg ρ,

so that ``u = R |φ| sin θ``. The pair ``(ln R, θ)`` then solves

    (ln R)' = V / (2 γ') sin 2θ,
    θ'      = γ' - (V / γ') sin² θ,

which reduces to the classical Prüfer system when ``V0 = 0``.

Examples::

    >>> from spectra.potentials import make_decaying, make_periodic
    >>> traj = pruefer_flow(make_periodic("zero"), make_decaying("zero"), 1.0, 5.0, (1.0, 0.0))
    >>> round(float(traj.theta_at(2.0)), 8), round(float(traj.lnR_at(2.0)), 8)
    (2.0, 0.0)
    >>> u, uprime = reconstruct_solution(traj, 2.0)
    >>> bool(abs(u - np.sin(2.0)) < 1e-8)
    True

"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .exc import HypothesisError, InputError
from .floquet import FloquetData, discriminant, floquet_data
from .numerics import (
    DEFAULT_TOLERANCE,
    DenseSolution,
    Grid,
    PanelGrid,
    Tolerance,
    integrate_ode,
)


__all__ = [
    "PrueferTrajectory",
    "RhoDecomposition",
    "WEIGHTS",
    "fourier_mode_integral",
    "gamma_log_integral",
    "initial_state",
    "orthogonality_integrals",
    "osc_integral",
    "pruefer_flow",
    "reconstruct_solution",
    "to_rho",
    "weight_function",
]


log = logging.getLogger(__name__)


# Resampling density of trajectories (points per unit length)
DEFAULT_DENSITY = 32


def _breakpoints(V0, V, L):
    points = set(V0.breakpoints_in(0.0, L))
    points.update(b for b in getattr(V, "breakpoints", ()) if 0 < b < L)
    return sorted(points)


@dataclass(frozen=True)
class RhoDecomposition:
    x: float
    rho: complex
    u: float
    uprime: float
    theta: float

    @property
    def R(self):
        return abs(self.rho)


def to_rho(data: FloquetData, u: float, uprime: float, x: float) -> RhoDecomposition:
    """Decompose the real Cauchy data ``(u, u')`` at ``x`` in the Floquet frame.

        >>> from spectra.potentials import make_periodic
        >>> data = floquet_data(make_periodic("zero"), 1.0)
        >>> d = to_rho(data, 1.0, 0.0, 0.0)
        >>> round(d.R, 8), round(float(np.angle(d.rho)), 8)
        (1.0, 1.57079633)

    """
    u, uprime = float(u), float(uprime)
    if u == 0 and uprime == 0:
        raise InputError("Degenerate Cauchy data (0, 0)", x=x)
    phi, phi_prime = data.frame(x)
    rho = complex((2 / data.omega) * (uprime * np.conj(phi) - u * np.conj(phi_prime)))
    theta = float(data.gamma(x) + np.angle(rho))
    return RhoDecomposition(x=float(x), rho=rho, u=u, uprime=uprime, theta=theta)


def initial_state(data: FloquetData, u0: float, u0prime: float) -> Tuple[float, float]:
    """``(R(0), θ(0))`` for the Cauchy data ``(u, u')(0) = (u0, u0prime)``."""
    decomposition = to_rho(data, u0, u0prime, 0.0)
    return decomposition.R, decomposition.theta


@dataclass(frozen=True)
class PrueferTrajectory:
    """``(ln R, θ)`` along [0, L], dense and resampled on ``grid``."""

    E: float
    L: float
    grid: Grid
    lnR: np.ndarray
    theta: np.ndarray
    data: FloquetData = field(repr=False)
    V: Callable = field(repr=False)
    solution: DenseSolution = field(repr=False)

    def lnR_at(self, x):
        return self.solution(x)[0]

    def theta_at(self, x):
        return self.solution(x)[1]

    def theta_prime(self, x):
        """``θ'`` from the right hand side of the flow."""
        x = np.asarray(x, dtype=float)
        g = self.data.gamma_prime(x)
        return g - self.V(x) / g * np.sin(self.theta_at(x)) ** 2

    def monotone_from(self):
        """First grid point beyond which ``θ' > 0`` at every grid point, or None."""
        negative = np.flatnonzero(self.theta_prime(self.grid.points) <= 0)
        if negative.size == 0:
            return float(self.grid.points[0])
        if negative[-1] == len(self.grid) - 1:
            return None
        return float(self.grid.points[negative[-1] + 1])


def pruefer_flow(
    V0,
    V,
    E: float,
    L: float,
    init: Tuple[float, float],
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    data: Optional[FloquetData] = None,
    density: int = DEFAULT_DENSITY,
) -> PrueferTrajectory:
    """Integrate the Prüfer flow from ``init = (R0, θ0)`` over [0, L].

    ``data`` can be passed to reuse Floquet data already computed at
    ``E``; otherwise it is computed (raising :class:`DomainError` off the
    band interior).

    """
    L = float(L)
    if not np.isfinite(L) or L <= 0:
        raise InputError(f"Trajectory length must be positive, got {L!r}", L=L)
    R0, theta0 = float(init[0]), float(init[1])
    if not R0 > 0:
        raise InputError(f"Initial amplitude must be positive, got {R0!r}")
    if data is None:
        data = floquet_data(V0, E, tol)

    def rhs(x, y):
        g = data.gamma_prime(x)
        v = float(V(x))
        s = np.sin(y[1])
        return [v / (2 * g) * 2 * s * np.cos(y[1]), g - v / g * s * s]

    solution = integrate_ode(
        rhs, (0.0, L), [np.log(R0), theta0], tol, breakpoints=_breakpoints(V0, V, L)
    )
    grid = Grid.per_unit(0.0, L, density)
    values = solution(grid.points)
    log.debug("Prüfer flow at E=%g over [0, %g]: %d steps", E, L, solution.n_steps)
    return PrueferTrajectory(
        E=float(E),
        L=L,
        grid=grid,
        lnR=values[0],
        theta=values[1],
        data=data,
        V=V,
        solution=solution,
    )


def reconstruct_solution(traj: PrueferTrajectory, x) -> Tuple[float, float]:
    """``(u, u')`` at ``x`` from ``ρ = R e^{i(θ - γ)}``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > traj.L):
        raise InputError(f"Point outside the trajectory span [0, {traj.L}]")
    lnR, theta = traj.solution(x)
    rho = np.exp(lnR + 1j * (theta - traj.data.gamma(x)))
    phi, phi_prime = traj.data.frame(x)
    return np.imag(rho * phi), np.imag(rho * phi_prime)


def _graded_edges(L, frequency, width):
    """Panel edges on [0, L] no wider than ``width (1 + x)`` or ``2 width π / frequency``."""
    cap = 2 * width * np.pi / frequency if frequency > 0 else np.inf
    edges = [0.0]
    while edges[-1] < L:
        x = edges[-1]
        edges.append(min(L, x + min(width * (1 + x), cap)))
    return np.array(edges)


def _adaptive_panel_integral(integrand, L, frequency, tol, order=16):
    """Integrate over [0, L] on graded panels, halving widths until two orders agree."""
    width = 0.5
    for _ in range(8):
        edges = _graded_edges(L, frequency, width)
        coarse = PanelGrid(edges, order=order)
        fine = PanelGrid(edges, order=order + 8)
        value = fine.integrate(fine.evaluate(integrand))
        error = abs(value - coarse.integrate(coarse.evaluate(integrand)))
        if error <= max(tol.abs_tol, tol.rel_tol * abs(value)):
            return value
        width /= 2
    log.warning("Oscillatory integral over [0, %g] did not settle (last change %.3g)", L, error)
    return value


def _phase(G):
    if G is None:
        return lambda x: 0.0
    return G


def osc_integral(
    gamma_freq: float, G: Optional[Callable], L: float, tol: Tolerance = DEFAULT_TOLERANCE
) -> float:
    """``∫_0^L sin(γ x + G(x)) / (1 + x) dx``.

    ``G`` is a vectorized phase with ``|G'(x)| (1 + x)`` bounded, or None
    for ``G = 0``.

        >>> round(osc_integral(1.0, lambda x: np.pi / 2 - x, np.e - 1), 10)
        1.0

    """
    gamma_freq = float(gamma_freq)
    if gamma_freq == 0:
        raise InputError("Frequency must be non-zero")
    if not L > 0:
        raise InputError(f"Integration length must be positive, got {L!r}", L=L)
    G = _phase(G)

    def integrand(x):
        return np.sin(gamma_freq * x + G(x)) / (1 + x)

    return float(_adaptive_panel_integral(integrand, L, abs(gamma_freq), tol))


def fourier_mode_integral(
    k: int,
    gamma_freq: float,
    G: Optional[Callable],
    L: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
) -> complex:
    """``∫_0^L e^{2πikx} sin(γ x + G(x)) / (1 + x) dx`` for ``0 < γ < 2π``."""
    if not 0 < gamma_freq < 2 * np.pi:
        raise HypothesisError("0 < gamma < 2 pi", f"Frequency {gamma_freq!r} outside (0, 2π)")
    if int(k) != k:
        raise InputError(f"Mode index must be an integer, got {k!r}")
    if not L > 0:
        raise InputError(f"Integration length must be positive, got {L!r}", L=L)
    G = _phase(G)
    mode = 2 * np.pi * int(k)

    def integrand(x):
        return np.exp(1j * mode * x) * np.sin(gamma_freq * x + G(x)) / (1 + x)

    return complex(_adaptive_panel_integral(integrand, L, abs(mode) + gamma_freq, tol))


# 1-periodic weights for the almost-orthogonality integrals
WEIGHTS = ("zero", "one", "cos", "gamma", "phi")


def weight_function(name: str, data: FloquetData) -> Callable:
    """A weight from :data:`WEIGHTS`; ``gamma`` and ``phi`` use ``data``."""
    if name == "zero":
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    if name == "one":
        return lambda x: np.ones_like(np.asarray(x, dtype=float))
    if name == "cos":
        return lambda x: np.cos(2 * np.pi * np.asarray(x, dtype=float))
    if name == "gamma":
        return lambda x: data.gamma_prime(np.asarray(x, dtype=float)) ** -2
    if name == "phi":
        return lambda x: np.abs(data.phi(np.asarray(x, dtype=float))) ** 2
    raise InputError(f"Unknown weight {name!r}; expected one of {', '.join(WEIGHTS)}")


def _check_half_band(V0, E1, E2, data1, data2, tol, samples=16):
    for E in np.linspace(E1, E2, samples)[1:-1]:
        if not abs(discriminant(V0, E, tol)) < 2:
            raise HypothesisError("same band", f"Energies {E1} and {E2} lie in different bands")
    half = np.pi / 2
    if (data1.k - half) * (data2.k - half) <= 0:
        raise HypothesisError(
            "same half band",
            f"Energies {E1} and {E2} straddle the half-band energy (k = π/2)",
        )


def orthogonality_integrals(
    V0,
    V,
    E1: float,
    E2: float,
    L: float,
    f="one",
    tol: Tolerance = DEFAULT_TOLERANCE,
) -> Tuple[float, float]:
    """``(I4, I22)`` for Dirichlet Prüfer angles at ``E1`` and ``E2``.

    ``I4 = ∫_0^L f cos 4θ(x, E1) / (1 + x) dx`` and
    ``I22 = ∫_0^L f sin 2θ(x, E1) sin 2θ(x, E2) / (1 + x) dx``. ``f`` is a
    name from :data:`WEIGHTS` or a vectorized 1-periodic callable.

    """
    if E1 == E2:
        raise InputError("Energies must differ")
    data1 = floquet_data(V0, E1, tol)
    data2 = floquet_data(V0, E2, tol)
    _check_half_band(V0, E1, E2, data1, data2, tol)
    weight = weight_function(f, data1) if isinstance(f, str) else f

    traj1 = pruefer_flow(V0, V, E1, L, initial_state(data1, 0.0, 1.0), tol, data=data1)
    traj2 = pruefer_flow(V0, V, E2, L, initial_state(data2, 0.0, 1.0), tol, data=data2)
    grid = PanelGrid.build(0.0, L, width=0.5, breakpoints=_breakpoints(V0, V, L))
    x = grid.nodes
    theta1 = traj1.theta_at(x)
    theta2 = traj2.theta_at(x)
    w = np.asarray(weight(x), dtype=float) / (1 + x)
    I4 = grid.integrate(w * np.cos(4 * theta1))
    I22 = grid.integrate(w * np.sin(2 * theta1) * np.sin(2 * theta2))
    return float(I4), float(I22)


def gamma_log_integral(data: FloquetData, L: float, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """``∫_0^L γ'(x, E)^-2 / (1 + x) dx``; grows like ``Γ(E) log L``.

    ``γ'`` is 1-periodic, so it is evaluated on one period only.

        >>> from spectra.potentials import make_periodic
        >>> data = floquet_data(make_periodic("zero"), 4.0)
        >>> bool(abs(gamma_log_integral(data, 10.0) - np.log(11) / 4) < 1e-8)
        True

    """
    L = float(L)
    if not L > 0:
        raise InputError(f"Integration length must be positive, got {L!r}", L=L)
    cell = PanelGrid.build(0.0, 1.0, width=0.25, breakpoints=data.V0.breakpoints)
    t = cell.nodes
    weighted = cell.weights * data.gamma_prime(t) ** -2
    n_cells = int(np.floor(L))
    total = 0.0
    if n_cells:
        starts = np.arange(n_cells, dtype=float)
        total = float(np.sum((1.0 / (1.0 + np.add.outer(starts, t))) @ weighted))
    remainder = L - n_cells
    if remainder > 0:
        tail = PanelGrid.build(0.0, remainder, width=0.25, breakpoints=data.V0.breakpoints)
        values = data.gamma_prime(tail.nodes) ** -2 / (1.0 + n_cells + tail.nodes)
        total += float(tail.integrate(values))
    return total
