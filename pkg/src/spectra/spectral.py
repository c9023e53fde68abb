"""Spectral measure of eventually periodic operators

For the half-line operator ``-D^2 + V0 + V_L`` with a boundary condition
at 0, the density of the spectral measure inside a band of ``H0`` is
computed two independent ways:

- :func:`density_prufer` -- from the Prüfer amplitude at the truncation
  point, ``dμ_L/dE = 2 / (π ω R(L, E)^2)``.

- :func:`density_weyl` -- from the Weyl m-function,
  ``(1/π) Im m(E + iε)`` extrapolated to ``ε = 0``.

The rest of the module is the separate-set machinery: unit vectors built
from Prüfer angles in ``L^2((0, L), (1 + x) dx)``, the inner-product
inequality they satisfy, and the scan for energies with large resonance
integrals.

"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .exc import DomainError, HypothesisError, InputError, PrecisionError, ResourceLimitError
from .floquet import floquet_data, monodromy, quasimomentum, solve_schrodinger
from .numerics import DEFAULT_TOLERANCE, PanelGrid, Tolerance, integrate_ode, parallel_map
from .pruefer import initial_state, pruefer_flow


__all__ = [
    "LeeBound",
    "PrueferVectors",
    "SeparateSetReport",
    "SpectralDensitySample",
    "WeylM",
    "calibration_sweep",
    "density_prufer",
    "density_weyl",
    "hilbert_norm_squared",
    "lee_bound_check",
    "m_function",
    "normalization",
    "prufer_vectors",
    "resonance_integral",
    "separate_set_scan",
]


log = logging.getLogger(__name__)


DEFAULT_EPS_SEQUENCE = (1e-2, 1e-3, 1e-4)

# Cap on L = ε^(-1-σ) in separate-set scans
DEFAULT_MAX_LENGTH = 1e6


@dataclass(frozen=True)
class SpectralDensitySample:
    E: float
    density: float
    method: str
    L: float
    eps: Optional[float] = None
    spread: Optional[float] = None
    converged: bool = True
    beta: float = 0.0
    samples: Tuple[Tuple[float, float], ...] = ()


@dataclass(frozen=True)
class WeylM:
    z: complex
    m: complex


def _breakpoints(V0, V, L):
    points = set(V0.breakpoints_in(0.0, L))
    points.update(b for b in getattr(V, "breakpoints", ()) if 0 < b < L)
    return sorted(points)


def _check_length(L):
    L = float(L)
    if not np.isfinite(L) or L <= 0:
        raise InputError(f"Truncation point must be positive, got {L!r}", L=L)
    return L


def density_prufer(
    V0, V, L: float, E: float, tol: Tolerance = DEFAULT_TOLERANCE, *, beta: float = 0.0
) -> SpectralDensitySample:
    """Density of the spectral measure of ``V0 + V_L`` at ``E`` from ``R(L, E)``.

    The boundary condition is ``(u, u')(0) = (sin β, cos β)``; ``β = 0``
    is Dirichlet.

        >>> from spectra.potentials import make_decaying, make_periodic
        >>> sample = density_prufer(make_periodic("zero"), make_decaying("zero"), 1.0, 4.0)
        >>> bool(abs(sample.density - 2 / np.pi) < 1e-8)
        True

    """
    L = _check_length(L)
    data = floquet_data(V0, E, tol)
    init = initial_state(data, np.sin(beta), np.cos(beta))
    trajectory = pruefer_flow(V0, V, E, L, init, tol, data=data)
    lnR = float(trajectory.lnR_at(L))
    density = 2 / (np.pi * data.omega) * np.exp(-2 * lnR)
    return SpectralDensitySample(
        E=float(E), density=float(density), method="prufer_formula", L=L, beta=float(beta)
    )


def _decaying_multiplier(Q, z, tol):
    trace = Q.trace
    root = np.sqrt(trace * trace / 4 - Q.det + 0j)
    multipliers = (trace / 2 + root, trace / 2 - root)
    multiplier = min(multipliers, key=abs)
    modulus = abs(multiplier)
    threshold = 1e3 * max(tol.rel_tol, np.finfo(float).eps)
    if 1 - modulus <= threshold:
        raise PrecisionError(z, modulus)
    matrix = Q.matrix
    candidates = (
        np.array([matrix[0, 1], multiplier - matrix[0, 0]]),
        np.array([multiplier - matrix[1, 1], matrix[1, 0]]),
    )
    return multiplier, max(candidates, key=lambda c: np.linalg.norm(c))


def m_function(
    V0, V, L: float, z: complex, tol: Tolerance = DEFAULT_TOLERANCE, *, beta: float = 0.0
) -> WeylM:
    """Weyl m-function of ``V0 + V_L`` at ``z`` (``Im z > 0``).

    Beyond ``L`` the operator is periodic, so the L² solution there is the
    Floquet solution with multiplier of modulus below 1. Its logarithmic
    derivative at ``L`` is carried back to 0 through the Riccati equation
    ``m' = V0 + V - z - m^2``, which stays bounded where the solution
    itself would grow.

        >>> from spectra.potentials import make_decaying, make_periodic
        >>> w = m_function(make_periodic("zero"), make_decaying("zero"), 1.0, 1j)
        >>> bool(abs(w.m - 1j * np.sqrt(1j)) < 1e-8)
        True

    """
    z = complex(z)
    if not z.imag > 0:
        raise InputError(f"m-function needs Im z > 0, got {z!r}", z=z)
    L = _check_length(L)
    Q = monodromy(V0, z, tol)
    _, vector = _decaying_multiplier(Q, z, tol)

    offset = L - np.floor(L)
    if offset > 0:
        vector = solve_schrodinger(
            V0, z, (0.0, offset), vector, tol, breakpoints=V0.breakpoints
        ).end
    if vector[0] == 0:
        raise PrecisionError(z, 1.0, "Floquet solution vanishes at the truncation point")
    m_end = vector[1] / vector[0]

    def riccati(x, y):
        return [V0(x) + V(x) - z - y[0] * y[0]]

    m0 = integrate_ode(
        riccati,
        (L, 0.0),
        np.array([m_end], dtype=complex),
        tol,
        breakpoints=_breakpoints(V0, V, L),
    ).end[0]
    if beta:
        c, s = np.cos(beta), np.sin(beta)
        m0 = (c * m0 + s) / (c - s * m0)
    return WeylM(z=z, m=complex(m0))


def density_weyl(
    V0,
    V,
    L: float,
    E: float,
    eps_sequence: Sequence[float] = DEFAULT_EPS_SEQUENCE,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    beta: float = 0.0,
) -> SpectralDensitySample:
    """``(1/π) Im m(E + iε)`` along ``eps_sequence``, extrapolated to ε = 0.

    The extrapolation is linear in ε through the last two values; their
    difference is reported as ``spread``. ``converged`` is False (and a
    warning logged) when the distance to the extrapolated value does not
    shrink along the sequence.

    """
    eps = [float(e) for e in eps_sequence]
    if len(eps) < 2 or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise InputError(
            "eps_sequence needs at least two positive, strictly decreasing values",
            eps_sequence=tuple(eps),
        )
    quasimomentum(V0, E, tol)
    values = [m_function(V0, V, L, complex(E, e), tol, beta=beta).m.imag / np.pi for e in eps]
    (e1, d1), (e2, d2) = zip(eps[-2:], values[-2:])
    extrapolated = (e1 * d2 - e2 * d1) / (e1 - e2)
    distances = np.abs(np.array(values) - extrapolated)
    slack = 1e-12 * max(1.0, abs(extrapolated))
    converged = bool(np.all(np.diff(distances) <= slack))
    if not converged:
        log.warning("Weyl density at E=%g did not converge monotonically in eps", E)
    return SpectralDensitySample(
        E=float(E),
        density=float(extrapolated),
        method="weyl_m",
        L=float(L),
        eps=eps[-1],
        spread=float(abs(d2 - d1)),
        converged=converged,
        beta=float(beta),
        samples=tuple(zip(eps, (float(v) for v in values))),
    )


def hilbert_norm_squared(V, L: float) -> float:
    """``∫_0^L V(x)^2 (1 + x) dx``, the squared norm in ``L^2((0, L), (1 + x) dx)``."""
    L = _check_length(L)
    grid = PanelGrid.build(
        0.0, L, width=1.0, breakpoints=[b for b in getattr(V, "breakpoints", ()) if b < L]
    )
    x = grid.nodes
    return float(grid.integrate(np.asarray(V(x), dtype=float) ** 2 * (1 + x)))


@dataclass(frozen=True)
class PrueferVectors:
    """Unit vectors ``e_i`` of ``L^2((0, L), (1 + x) dx)`` sampled on ``grid``."""

    energies: Tuple[float, ...]
    L: float
    grid: PanelGrid = field(repr=False)
    vectors: np.ndarray = field(repr=False)
    normalizations: Tuple[float, ...] = ()

    @property
    def weights(self):
        """Quadrature weights of the inner product, ``(1 + x)`` included."""
        return self.grid.weights * (1 + self.grid.nodes)

    def inner(self, f):
        """``<f, e_i>`` for every ``i``; ``f`` is a vectorized callable."""
        values = np.asarray(f(self.grid.nodes), dtype=float)
        return self.vectors @ (self.weights * values)


def _unnormalized_vector(V0, V, E, L, grid, tol):
    data = floquet_data(V0, E, tol)
    trajectory = pruefer_flow(V0, V, E, L, initial_state(data, 0.0, 1.0), tol, data=data)
    x = grid.nodes
    return np.sin(2 * trajectory.theta_at(x)) / (data.gamma_prime(x) * (1 + x))


def prufer_vectors(
    V0, V, energies: Sequence[float], L: float, tol: Tolerance = DEFAULT_TOLERANCE
) -> PrueferVectors:
    """``e_i = sin 2θ(x, E_i) / (√A_i γ'(x, E_i) (1 + x))`` on [0, L].

    ``θ`` is the Dirichlet Prüfer angle and ``A_i`` makes ``e_i`` a unit
    vector.

    """
    L = _check_length(L)
    grid = PanelGrid.build(0.0, L, width=0.5, breakpoints=_breakpoints(V0, V, L))
    weights = grid.weights * (1 + grid.nodes)
    raw = parallel_map(lambda E: _unnormalized_vector(V0, V, E, L, grid, tol), energies)
    vectors = []
    normalizations = []
    for values in raw:
        A = float(np.dot(weights, values * values))
        normalizations.append(A)
        vectors.append(values / np.sqrt(A))
    return PrueferVectors(
        energies=tuple(float(E) for E in energies),
        L=L,
        grid=grid,
        vectors=np.array(vectors),
        normalizations=tuple(normalizations),
    )


def normalization(V0, V, E: float, L: float, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """``A = ∫_0^L sin^2 2θ(x, E) / (γ'(x, E)^2 (1 + x)) dx``; about ``Γ(E) log L / 2``."""
    return prufer_vectors(V0, V, [E], L, tol).normalizations[0]


@dataclass(frozen=True)
class LeeBound:
    alpha: float
    lhs: float
    rhs: float
    holds: bool


def lee_bound_check(vectors, g, weights=None, *, unit_tol: float = 1e-8) -> LeeBound:
    """Check ``Σ |<g, e_i>|^2 <= (1 + α) ||g||^2`` with ``α = N sup |<e_i, e_j>|``.

    ``vectors`` has one sampled unit vector per row, ``g`` is sampled on
    the same points, and ``weights`` are the quadrature weights of the
    inner product (Euclidean when omitted).

        >>> e1 = np.array([1.0, 0.0])
        >>> e2 = np.array([0.1, np.sqrt(1 - 0.01)])
        >>> check = lee_bound_check([e1, e2], e1)
        >>> round(check.alpha, 12), round(check.lhs, 12), round(check.rhs, 12), check.holds
        (0.2, 1.01, 1.2, True)

    """
    vectors = np.atleast_2d(np.asarray(vectors))
    g = np.asarray(g)
    weights = np.ones(vectors.shape[1]) if weights is None else np.asarray(weights, dtype=float)
    if g.shape != (vectors.shape[1],) or weights.shape != g.shape:
        raise InputError("Vectors, g and weights must be sampled on the same points")
    gram = (vectors * weights) @ np.conj(vectors).T
    norms = np.real(np.diag(gram))
    if np.any(np.abs(norms - 1) > unit_tol):
        raise InputError(f"Vectors are not unit vectors (norms² {norms.tolist()})")
    n = vectors.shape[0]
    off_diagonal = np.abs(gram - np.diag(np.diag(gram)))
    alpha = float(n * off_diagonal.max()) if n > 1 else 0.0
    if alpha >= 1:
        raise HypothesisError("N sup |<e_i, e_j>| < 1", f"alpha = {alpha:.6g} is not below 1")
    products = (vectors * weights) @ np.conj(g)
    lhs = float(np.sum(np.abs(products) ** 2))
    rhs = float((1 + alpha) * np.real(np.dot(weights, np.abs(g) ** 2)))
    return LeeBound(alpha=alpha, lhs=lhs, rhs=rhs, holds=lhs <= rhs * (1 + 1e-12))


def resonance_integral(V0, V, E: float, L: float, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """``∫_0^L V(x) sin 2θ(x, E) / γ'(x, E) dx`` along the Dirichlet Prüfer angle."""
    data = floquet_data(V0, E, tol)
    trajectory = pruefer_flow(V0, V, E, L, initial_state(data, 0.0, 1.0), tol, data=data)
    grid = PanelGrid.build(0.0, L, width=0.5, breakpoints=_breakpoints(V0, V, L))
    x = grid.nodes
    values = V(x) * np.sin(2 * trajectory.theta_at(x)) / data.gamma_prime(x)
    return float(grid.integrate(values))


@dataclass(frozen=True)
class SeparateSetReport:
    eps: float
    N: int
    L: float
    threshold: float
    candidates: Tuple[float, ...]
    resonant: Tuple[float, ...]
    energies: Tuple[float, ...] = field(repr=False)
    integrals: Tuple[float, ...] = field(repr=False)
    quasimomenta: Tuple[float, ...] = field(repr=False)

    @property
    def bound_holds(self):
        return len(self.candidates) <= self.N


def _select(energies, integrals, ks, eps, N, threshold):
    """Resonant energies, then a greedy separated subset in decreasing order of |integral|."""
    order = np.argsort(-np.abs(integrals), kind="stable")
    resonant = [i for i in order if abs(integrals[i]) >= threshold]
    gap = eps ** (1 / N**2)
    chosen = []
    for i in resonant:
        if all(abs(ks[i] - ks[j]) >= gap for j in chosen):
            chosen.append(i)
    return (
        tuple(float(energies[i]) for i in sorted(chosen)),
        tuple(float(energies[i]) for i in sorted(resonant)),
    )


def separate_set_scan(
    V0,
    V,
    interval: Tuple[float, float],
    eps: float,
    sigma: float,
    beta: float,
    C1: float,
    N: int,
    E_grid: Sequence[float],
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    max_length: float = DEFAULT_MAX_LENGTH,
) -> SeparateSetReport:
    """Scan ``E_grid`` for an (ε, N)-separate set at ``L = ε^(-1-σ)``.

    An energy is resonant when its resonance integral reaches
    ``(1 - β) C1 log(1/ε)``; resonant energies are then taken greedily,
    largest integral first, keeping pairwise quasimomentum gaps of at
    least ``ε^(1/N^2)``.

    """
    if not 0 < eps < 1:
        raise InputError(f"eps must lie in (0, 1), got {eps!r}")
    if int(N) != N or N < 1:
        raise InputError(f"N must be a positive integer, got {N!r}")
    if np.isinf(getattr(V, "support", np.inf)) and V.alpha < 1:
        raise HypothesisError("|V| <= B/(1+x)", f"Envelope exponent {V.alpha} is below 1")
    L = eps ** (-1 - sigma)
    if L > max_length:
        raise ResourceLimitError("L", L, max_length)
    a, b = interval
    energies = np.asarray(E_grid, dtype=float)
    if energies.size == 0:
        raise InputError("Empty energy grid")
    if np.any(energies < a) or np.any(energies > b):
        raise InputError(f"Energy grid leaves the interval [{a}, {b}]")
    ks = np.array(parallel_map(lambda E: quasimomentum(V0, E, tol), energies))
    if np.any(ks < np.pi / 2) and np.any(ks > np.pi / 2):
        raise HypothesisError("one half band", "Energy grid straddles the half-band energy")
    for E in np.linspace(a, b, 17):
        if not abs(monodromy(V0, E, tol).trace) < 2:
            raise DomainError(float(E), message=f"Interval [{a}, {b}] is not inside one band")

    integrals = np.array(parallel_map(lambda E: resonance_integral(V0, V, E, L, tol), energies))
    threshold = (1 - beta) * C1 * np.log(1 / eps)
    candidates, resonant = _select(energies, integrals, ks, eps, int(N), threshold)
    log.info(
        "Separate-set scan: %d resonant, %d separated (N = %d)", len(resonant), len(candidates), N
    )
    return SeparateSetReport(
        eps=float(eps),
        N=int(N),
        L=float(L),
        threshold=float(threshold),
        candidates=candidates,
        resonant=resonant,
        energies=tuple(energies.tolist()),
        integrals=tuple(integrals.tolist()),
        quasimomenta=tuple(ks.tolist()),
    )


def calibration_sweep(report: SeparateSetReport, C1_values, beta: float = 0.0):
    """``(C1, size of the separated set)`` for each ``C1``, reusing the scan's integrals."""
    energies = np.array(report.energies)
    integrals = np.array(report.integrals)
    ks = np.array(report.quasimomenta)
    rows = []
    for C1 in C1_values:
        threshold = (1 - beta) * C1 * np.log(1 / report.eps)
        candidates, _ = _select(energies, integrals, ks, report.eps, report.N, threshold)
        rows.append((float(C1), len(candidates)))
    return rows
