"""Christ-Kiselev multilinear machinery

Norms, martingale structures and multilinear operators on the half line,
all evaluated on a truncation ``[0, X_max]``:

- :func:`lp_l1_norm` -- ``(Σ_k (∫_k^{k+1} |f|)^p)^{1/p}``.

- :func:`build_martingale` -- nested dyadic partitions ``E_j^m`` adapted
  to ``f``: every cell of level ``m`` carries at most ``2^-m`` of the
  total ``ℓ^p(L^1)`` mass ``ν = ‖f χ‖^p``.

- :func:`b_norm` -- ``Σ_m m^s (Σ_j |∫_{E_j^m} g|^2)^{1/2}``.

- :func:`multi_M` / :func:`multi_M_star` -- simplex integrals of a
  product over ``x <= t_1 <= ... <= t_n <= x'`` and their supremum.

- :func:`tail_B` -- iterated tail integrals ``∫_x^∞ ∫_{t_1}^∞ ...`` as
  limits along a cutoff ladder.

- :func:`s_operator`, :func:`s_star`, :func:`g_norm` -- the oscillatory
  operator ``f ↦ ∫ w e^{-ih} f`` of an :class:`OscKernel`.

Simplex and tail integrals are computed by iterated cumulative
integration on Gauss-Legendre panels, never by n-dimensional
quadrature.

Examples::

    >>> from spectra.potentials import make_decaying
    >>> box = make_decaying("bump:1,0,4")
    >>> round(lp_l1_norm(box, 2, 4).value, 12)
    2.0
    >>> structure = build_martingale(box, 1, 2, 4)
    >>> [np.round(level, 9).tolist() for level in structure.levels]
    [[2.0], [1.0, 2.0, 3.0]]
    >>> bool(abs(b_norm(box, structure, 1).value - (2 * 2**0.5 + 4)) < 1e-9)
    True
    >>> round(multi_M([np.ones_like] * 2, 0.0, 1.0).real, 12)
    0.5

"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .exc import InputError
from .floquet import FloquetData
from .numerics import DEFAULT_TOLERANCE, PanelGrid, Tolerance, find_root, fit_line, quad


__all__ = [
    "BNorm",
    "LpL1Norm",
    "MartingaleStructure",
    "MultilinearRow",
    "OscKernel",
    "TailIntegral",
    "TailLimit",
    "YOUNG_CONSTANT",
    "b_norm",
    "bound_ratios",
    "build_martingale",
    "cell_mass",
    "conjugate_pattern",
    "convolution_ratio",
    "g_norm",
    "lp_l1_norm",
    "multi_M",
    "multi_M_star",
    "nested_tails",
    "restriction_ratio",
    "s_operator",
    "s_star",
    "staggered_cutoffs",
    "tail_B",
    "tail_limit_check",
]


log = logging.getLogger(__name__)


# Σ_{k ∈ Z} 1 / (1 + k^2)
YOUNG_CONSTANT = math.pi / math.tanh(math.pi)

# Fraction of the total mass a truncation may leave out without a warning
DISCARDED_MASS_FRACTION = 1e-6


def _breakpoints(functions):
    points = set()
    for f in functions:
        points.update(float(b) for b in (getattr(f, "breakpoints", ()) or ()))
    return sorted(points)


@dataclass(frozen=True)
class _Conjugate:
    g: Callable

    def __call__(self, x):
        return np.conj(self.g(x))

    @property
    def breakpoints(self):
        return tuple(getattr(self.g, "breakpoints", ()) or ())


@dataclass(frozen=True)
class _Product:
    functions: Tuple[Callable, ...]
    breakpoints: Tuple[float, ...] = ()

    def __call__(self, x):
        value = 1.0
        for f in self.functions:
            value = value * f(x)
        return value


def conjugate_pattern(g: Callable, n: int, *, conjugate_first: bool = False) -> list:
    """``[g, conj g, g, ...]`` of length ``n`` (the ``M_n(g)`` convention)."""
    n = int(n)
    if n < 1:
        raise InputError(f"Order must be at least 1, got {n}")
    conjugate = _Conjugate(g)
    pattern = [conjugate, g] if conjugate_first else [g, conjugate]
    return [pattern[i % 2] for i in range(n)]


def _check_p(p):
    if not (np.isfinite(p) and p >= 1):
        raise InputError(f"Exponent p must lie in [1, ∞), got {p!r}", p=p)
    return float(p)


def _check_length(X_max):
    if not (np.isfinite(X_max) and X_max > 0):
        raise InputError(f"Truncation point must be positive, got {X_max!r}", X_max=X_max)
    return float(X_max)


# ----------------------------------------------------------------------
# ℓ^p(L^1) mass


class _Mass:
    """``ν(a, b) = ‖f χ_[a, b]‖^p_{ℓ^p(L^1)}`` on [0, X_max].

    Built from an antiderivative of ``|f|`` on panels aligned with the
    unit intervals.

    """

    def __init__(self, f, p, X_max, width=0.25):
        self.p = p
        self.X_max = X_max
        n_units = int(np.ceil(X_max - 1e-12))
        self.units = np.minimum(np.arange(n_units + 1, dtype=float), X_max)
        grid = PanelGrid.build(
            0.0, X_max, width=width, breakpoints=list(self.units[1:-1]) + _breakpoints([f])
        )
        self.F = grid.antiderivative(np.abs(grid.evaluate(f)))
        self.unit_values = self.F(self.units)
        self.masses = np.maximum(np.diff(self.unit_values), 0.0)
        self.prefix = np.concatenate([[0.0], np.cumsum(self.masses**p)])

    def _unit(self, x):
        return min(int(np.floor(x)), self.masses.size - 1)

    def __call__(self, a, b):
        if b <= a:
            return 0.0
        p = self.p
        ka, kb = self._unit(a), self._unit(b)
        Fa, Fb = float(self.F(a)), float(self.F(b))
        if ka == kb:
            return max(Fb - Fa, 0.0) ** p
        head = max(self.unit_values[ka + 1] - Fa, 0.0) ** p
        tail = max(Fb - self.unit_values[kb], 0.0) ** p
        return head + (self.prefix[kb] - self.prefix[ka + 1]) + tail

    def discarded(self, support):
        """Power-law extrapolation of the mass beyond ``X_max``."""
        if support <= self.X_max:
            return 0.0
        powers = self.masses**self.p
        half = powers.size // 2
        ks = np.arange(half, powers.size) + 0.5
        tail = powers[half:]
        keep = tail > 0
        if not keep.any():
            return 0.0
        if keep.sum() < 3:
            return math.nan
        slope, intercept, _ = fit_line(np.log(ks[keep]), np.log(tail[keep]))
        if slope >= -1:
            return math.inf
        return float(np.exp(intercept) * self.X_max ** (slope + 1) / -(slope + 1))


@dataclass(frozen=True)
class LpL1Norm:
    p: float
    value: float
    masses: np.ndarray = field(repr=False)


def lp_l1_norm(f: Callable, p: float, X_max: float, *, width: float = 0.25) -> LpL1Norm:
    """``‖f‖_{ℓ^p(L^1)}`` over the unit intervals ``[k, k + 1] ⊂ [0, X_max]``.

        >>> from spectra.potentials import make_decaying
        >>> box = make_decaying("bump:1,0,2")
        >>> round(lp_l1_norm(box, 2, 10).value ** 2, 12), round(lp_l1_norm(box, 1, 10).value, 12)
        (2.0, 2.0)

    """
    p = _check_p(p)
    X_max = _check_length(X_max)
    n_units = int(np.floor(X_max))
    if n_units < 1:
        raise InputError(f"Truncation point must be at least 1, got {X_max!r}", X_max=X_max)
    masses = _Mass(f, p, float(n_units), width).masses
    value = float(np.sum(masses**p) ** (1 / p))
    return LpL1Norm(p=p, value=value, masses=masses)


# ----------------------------------------------------------------------
# Martingale structures


@dataclass(frozen=True)
class MartingaleStructure:
    """Nested dyadic partitions of [0, X_max].

    ``levels[m - 1]`` holds the ``2^m - 1`` interior cut points of level
    ``m``; every level contains the cut points of the level above it.
    ``total`` is ``ν([0, X_max])`` and ``discarded_mass`` an estimate of
    the mass beyond ``X_max``.

    """

    depth: int
    X_max: float
    p: float
    total: float
    levels: Tuple[np.ndarray, ...] = field(repr=False)
    discarded_mass: float
    f: Callable = field(repr=False, compare=False)
    mass: Callable = field(repr=False, compare=False)

    def boundaries(self, m):
        """Cell boundaries of level ``m`` including 0 and ``X_max``."""
        if not 0 <= m <= self.depth:
            raise InputError(f"Level must lie in [0, {self.depth}], got {m}")
        inner = self.levels[m - 1] if m else np.empty(0)
        return np.concatenate([[0.0], inner, [self.X_max]])

    def cells(self, m):
        b = self.boundaries(m)
        return list(zip(b[:-1].tolist(), b[1:].tolist()))

    def adaptedness(self):
        """``max_{m, j} 2^m ν(E_j^m) / ν([0, X_max])``; adapted when <= 1."""
        worst = 0.0
        for m in range(1, self.depth + 1):
            for a, b in self.cells(m):
                worst = max(worst, 2**m * self.mass(a, b) / self.total)
        return worst

    def is_adapted(self, rel_tol=1e-9):
        return self.adaptedness() <= 1 + rel_tol


# Root tolerance of the half-mass splits
_SPLIT_TOLERANCE = Tolerance(abs_tol=1e-14, rel_tol=0.0)


def _split(mass, a, b):
    half = 0.5 * mass(a, b)
    if half == 0:
        return 0.5 * (a + b)
    return find_root(lambda t: mass(a, t) - half, (a, b), _SPLIT_TOLERANCE)


def build_martingale(
    f: Callable,
    p: float,
    depth: int,
    X_max: float,
    *,
    width: float = 0.25,
) -> MartingaleStructure:
    """Martingale structure of the given depth on [0, X_max] adapted to ``f``.

    Each cell ``[a, b]`` is split at the point ``t`` with
    ``ν([a, t]) = ν([a, b]) / 2``. The right child then carries at most
    half the mass as well, because ``ν`` is superadditive for ``p >= 1``.
    Cells without mass are split at their midpoint.

        >>> import math
        >>> s = build_martingale(lambda x: np.exp(-x), 1, 1, 20)
        >>> bool(abs(s.levels[0][0] - math.log(2 / (1 + math.exp(-20)))) < 1e-10)
        True

    """
    p = _check_p(p)
    X_max = _check_length(X_max)
    depth = int(depth)
    if depth < 1:
        raise InputError(f"Depth must be at least 1, got {depth}")
    mass = _Mass(f, p, X_max, width)
    total = mass(0.0, X_max)
    if not total > 0:
        raise InputError(f"Function has no ℓ^p(L^1) mass on [0, {X_max}]")

    cells = [(0.0, X_max)]
    levels = []
    for m in range(1, depth + 1):
        children = []
        cuts = []
        for a, b in cells:
            t = _split(mass, a, b)
            cuts.append(t)
            children.extend([(a, t), (t, b)])
        previous = levels[-1] if levels else np.empty(0)
        level = np.sort(np.concatenate([previous, cuts]))
        level.flags.writeable = False
        levels.append(level)
        cells = children
        log.debug("Martingale level %d: %d cells", m, len(cells))

    discarded = mass.discarded(getattr(f, "support", np.inf))
    if not discarded <= DISCARDED_MASS_FRACTION * total:
        log.warning(
            "Truncation at %g leaves out an estimated mass %.3g of %.3g", X_max, discarded, total
        )
    return MartingaleStructure(
        depth=depth,
        X_max=X_max,
        p=p,
        total=float(total),
        levels=tuple(levels),
        discarded_mass=discarded,
        f=f,
        mass=mass,
    )


def cell_mass(
    f: Callable, p: float, a: float, b: float, tol: Tolerance = DEFAULT_TOLERANCE
) -> float:
    """``ν([a, b])`` recomputed unit piece by unit piece with adaptive quadrature.

    Shares nothing with the panel antiderivative behind
    :class:`MartingaleStructure`, so it checks its cells independently.

        >>> round(cell_mass(lambda x: 1.0, 2, 0.5, 2.0, Tolerance(1e-12, 1e-12)), 12)
        1.25

    """
    p = _check_p(p)
    if b <= a:
        return 0.0
    cuts = np.arange(np.ceil(a), np.floor(b) + 1)
    cuts = np.unique(np.concatenate([[a, b], cuts[(cuts > a) & (cuts < b)]]))
    points = _breakpoints([f])
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        piece = quad(lambda x: abs(float(f(x))), (lo, hi), tol, points=points)
        total += piece**p
    return float(total)


# ----------------------------------------------------------------------
# 𝔅^s norms


@dataclass(frozen=True)
class BNorm:
    s: float
    value: float
    depth: int
    terms: Tuple[float, ...]

    @property
    def last_term(self):
        """Contribution of the deepest level (truncation diagnostic)."""
        return self.terms[-1]

    @property
    def ratios(self):
        """Ratios of successive level terms."""
        terms = np.asarray(self.terms)
        with np.errstate(divide="ignore", invalid="ignore"):
            return terms[1:] / terms[:-1]


def _antiderivative(g, structure, width):
    grid = PanelGrid.build(
        0.0,
        structure.X_max,
        width=width,
        breakpoints=list(structure.boundaries(structure.depth)) + _breakpoints([g]),
    )
    return grid.antiderivative(grid.evaluate(g))


def _b_terms(G, structure, s, interval=None):
    lo, hi = (0.0, structure.X_max) if interval is None else interval
    terms = []
    for m in range(1, structure.depth + 1):
        values = G(np.clip(structure.boundaries(m), lo, hi))
        terms.append(m**s * float(np.sqrt(np.sum(np.abs(np.diff(values)) ** 2))))
    return tuple(terms)


def _check_interval(interval, X_max):
    if interval is None:
        return None
    lo, hi = float(interval[0]), float(interval[1])
    if not 0 <= lo <= hi:
        raise InputError(f"Bad interval [{lo}, {hi}]")
    return min(lo, X_max), min(hi, X_max)


def b_norm(
    g: Callable,
    structure: MartingaleStructure,
    s: float = 1.0,
    *,
    interval: Optional[Tuple[float, float]] = None,
    width: float = 0.5,
) -> BNorm:
    """``‖g‖_{𝔅^s}`` on ``structure``, summed over levels ``1..depth``.

    With ``interval = (lo, hi)`` the norm of ``g χ_[lo, hi]`` is returned.

    """
    interval = _check_interval(interval, structure.X_max)
    G = _antiderivative(g, structure, width)
    terms = _b_terms(G, structure, s, interval)
    return BNorm(s=float(s), value=float(sum(terms)), depth=structure.depth, terms=terms)


def restriction_ratio(
    g: Callable, structure: MartingaleStructure, intervals, *, width: float = 0.5
) -> np.ndarray:
    """``‖g χ_I‖_𝔅 / ‖g‖_{𝔅^2}`` for every interval ``I``."""
    G = _antiderivative(g, structure, width)
    reference = sum(_b_terms(G, structure, 2.0))
    if reference == 0:
        raise InputError("g has vanishing 𝔅^2 norm on this structure")
    ratios = [
        sum(_b_terms(G, structure, 1.0, _check_interval(interval, structure.X_max)))
        for interval in intervals
    ]
    return np.asarray(ratios) / reference


def convolution_ratio(f) -> float:
    """``Σ_{m,n} f_m f_n / (1 + |m - n|^2)`` divided by ``Σ f_n^2``.

    Young's inequality bounds it by :data:`YOUNG_CONSTANT`.

        >>> bool(convolution_ratio([1.0, 2.0, 3.0]) <= YOUNG_CONSTANT)
        True
        >>> convolution_ratio([5.0])
        1.0

    """
    f = np.asarray(f, dtype=float)
    if f.ndim != 1 or f.size == 0:
        raise InputError("Need a non-empty sequence")
    denominator = float(np.dot(f, f))
    if denominator == 0:
        raise InputError("Sequence vanishes")
    kernel = linalg.toeplitz(1.0 / (1.0 + np.arange(f.size, dtype=float) ** 2))
    return float(f @ kernel @ f) / denominator


# ----------------------------------------------------------------------
# Simplex integrals


def _as_list(g_list, n=None):
    if callable(g_list):
        if n is None:
            raise InputError("A single function needs the order n")
        return conjugate_pattern(g_list, n)
    g_list = list(g_list)
    if not g_list:
        raise InputError("Need at least one function")
    return g_list


def _simplex_profile(g_list, x, end, targets, width):
    """``M_n(g_list)(x, t)`` for every ``t`` in ``targets``."""
    grid = PanelGrid.build(
        x, end, width=width, breakpoints=list(targets) + _breakpoints(g_list)
    )
    inner = np.ones(grid.nodes.size)
    for g in g_list[:-1]:
        inner = grid.cumulative(grid.evaluate(g) * inner)
    values = grid.edge_values(grid.evaluate(g_list[-1]) * inner)
    index = np.searchsorted(grid.edges, targets)
    return values[np.clip(index, 0, grid.edges.size - 1)]


def multi_M(
    g_list: Sequence[Callable], x: float, xprime: float, *, n=None, width: float = 0.5
) -> complex:
    """``M_n(g_1, ..., g_n)(x, x')``, the integral of ``Π g_k(t_k)`` over
    ``x <= t_1 <= ... <= t_n <= x'``.

    Evaluated as ``I_1(t) = ∫_x^t g_1``, ``I_k(t) = ∫_x^t g_k I_{k-1}``.
    A single callable with ``n`` stands for the pattern ``g, conj g, ...``.

        >>> round(multi_M([np.ones_like] * 5, 0.0, 2.0).real, 12) == round(2**5 / 120, 12)
        True

    """
    g_list = _as_list(g_list, n)
    x, xprime = float(x), float(xprime)
    if x > xprime:
        raise InputError(f"Need x <= x', got ({x}, {xprime})")
    if x == xprime:
        return 0j
    return complex(_simplex_profile(g_list, x, xprime, [xprime], width)[0])


def multi_M_star(
    g_list,
    points,
    *,
    n=None,
    width: float = 0.5,
    return_location: bool = False,
):
    """``sup |M_n(x, x')|`` over ``x <= x'`` in ``points``.

    The grid maximum is refined by one bisection pass around the argmax.
    With ``return_location`` the triple ``(value, x, x')`` is returned.

        >>> from spectra.potentials import make_decaying
        >>> box = make_decaying("bump:1,0,1")
        >>> value, x, xp = multi_M_star([box] * 2, np.linspace(0, 1, 5), return_location=True)
        >>> round(value, 12), float(x), float(xp)
        (0.5, 0.0, 1.0)

    """
    g_list = _as_list(g_list, n)
    points = np.unique(np.asarray(points, dtype=float))
    if points.size < 2 or not np.all(np.isfinite(points)):
        raise InputError("Need a grid of at least two finite points")
    end = float(points[-1])
    best = (-1.0, points[0], points[0])
    for i, x in enumerate(points[:-1]):
        values = np.abs(_simplex_profile(g_list, float(x), end, points[i:], width))
        j = int(np.argmax(values))
        if values[j] > best[0]:
            best = (float(values[j]), float(x), float(points[i + j]))

    def around(value):
        i = int(np.searchsorted(points, value))
        candidates = {value}
        if i > 0:
            candidates.add(0.5 * (points[i - 1] + value))
        if i < points.size - 1:
            candidates.add(0.5 * (value + points[i + 1]))
        return sorted(candidates)

    for x in around(best[1]):
        for xp in around(best[2]):
            if x < xp:
                value = abs(multi_M(g_list, x, xp, width=width))
                if value > best[0]:
                    best = (value, x, xp)
    return best if return_location else best[0]


@dataclass(frozen=True)
class MultilinearRow:
    n: int
    m_star: float
    b_norm: float
    ratio: float


def bound_ratios(
    g: Callable,
    structure: MartingaleStructure,
    n_max: int,
    points,
    *,
    s: float = 1.0,
    width: float = 0.5,
) -> list:
    """Rows ``(n, M_n*(g), ‖g‖_𝔅, [M_n*(g) √(n!) / ‖g‖_𝔅^n]^{1/n})``."""
    norm = b_norm(g, structure, s, width=width).value
    if norm == 0:
        raise InputError("g has vanishing 𝔅 norm on this structure")
    rows = []
    for n in range(1, int(n_max) + 1):
        m_star = multi_M_star(g, points, n=n, width=width)
        ratio = (m_star * math.sqrt(math.factorial(n))) ** (1 / n) / norm
        rows.append(MultilinearRow(n=n, m_star=m_star, b_norm=norm, ratio=ratio))
        log.debug("M_%d* = %.6g, ratio %.6g", n, m_star, ratio)
    return rows


# ----------------------------------------------------------------------
# Tail integrals


def nested_tails(g_by_depth, x, cutoffs, *, width=0.5, max_width=2.0):
    """Nested tail integrals ``J_d(x)`` for every depth ``d``.

    ``J_1(t) = ∫_t^{y_1} g_1`` and ``J_d(t) = ∫_t^{y_d} g_d J_{d-1}``,
    where depth 1 is the innermost (largest) variable.

    """
    end = max(cutoffs)
    grid = PanelGrid.graded(
        x,
        end,
        width=width,
        max_width=max_width,
        breakpoints=list(cutoffs) + _breakpoints(g_by_depth),
    )
    nodes = grid.nodes
    inner = np.ones(nodes.size)
    totals = []
    for g, y in zip(g_by_depth, cutoffs):
        values = np.where(nodes < y, grid.evaluate(g) * inner, 0.0)
        total = grid.integrate(values)
        inner = total - grid.cumulative(values)
        totals.append(complex(total))
    return totals


def _check_cutoffs(x, cutoffs):
    cutoffs = [float(y) for y in cutoffs]
    if len(cutoffs) < 2:
        raise InputError("Need at least two cutoffs")
    if any(b <= a for a, b in zip(cutoffs[:-1], cutoffs[1:])):
        raise InputError("Cutoffs must be strictly increasing")
    if cutoffs[0] <= x:
        raise InputError(f"Cutoffs must lie beyond x = {x}")
    return cutoffs


def staggered_cutoffs(n, previous, last):
    """Per-depth cutoffs ``y_1 > ... > y_n`` in (previous, last], innermost first."""
    step = (last - previous) / n
    return [last - d * step for d in range(n)]


@dataclass(frozen=True)
class TailIntegral:
    """``B_n(x)`` along a cutoff ladder.

    ``values`` holds the diagonal cutoffs ``y_1 = ... = y_n = y``,
    ``staggered`` one evaluation with distinct cutoffs inside the last
    rung. ``spread`` is the larger of the last two differences.

    """

    x: float
    value: complex
    cutoffs: Tuple[float, ...]
    values: Tuple[complex, ...]
    staggered: complex
    spread: float
    converged: bool
    tail_norms: Tuple[float, ...] = ()

    @property
    def tail_norms_decreasing(self):
        norms = np.asarray(self.tail_norms)
        return bool(np.all(np.diff(norms) <= 1e-12 * max(norms.max(initial=0.0), 1.0)))


def tail_B(
    g_list: Sequence[Callable],
    x: float,
    cutoffs: Sequence[float],
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    structure: Optional[MartingaleStructure] = None,
    width: float = 0.5,
    max_width: float = 2.0,
) -> TailIntegral:
    """``B_n(g_1, ..., g_n)(x) = ∫_x^∞ g_1(t_1) ∫_{t_1}^∞ g_2(t_2) ... dt``.

    The improper integral is taken along the increasing ``cutoffs``; the
    result is flagged converged when the last two rungs and the
    staggered evaluation agree within ``tol``. When a martingale
    structure is passed, ``tail_norms`` reports ``max_k ‖g_k χ_[y, X_max]‖_𝔅``
    for every rung ``y`` below ``X_max``.

        >>> import math
        >>> g = lambda t: np.exp(-t)
        >>> result = tail_B([g, g], 0.5, [20.0, 40.0, 80.0])
        >>> bool(abs(result.value - math.exp(-1.0) / 2) < 1e-10), result.converged
        (True, True)

    """
    g_list = _as_list(g_list)
    x = float(x)
    cutoffs = _check_cutoffs(x, cutoffs)
    n = len(g_list)
    by_depth = g_list[::-1]
    panels = dict(width=width, max_width=max_width)
    values = [nested_tails(by_depth, x, [y] * n, **panels)[-1] for y in cutoffs]
    staggered_at = staggered_cutoffs(n, cutoffs[-2], cutoffs[-1])
    staggered = nested_tails(by_depth, x, staggered_at, **panels)[-1]
    value = values[-1]
    spread = max(abs(values[-1] - values[-2]), abs(staggered - value))
    converged = spread <= tol.abs_tol + tol.rel_tol * abs(value)
    if not converged:
        log.warning("Tail integral at x=%g not settled: spread %.3g", x, spread)

    tail_norms = ()
    if structure is not None:
        antiderivatives = [_antiderivative(g, structure, width) for g in g_list]
        tail_norms = tuple(
            max(sum(_b_terms(G, structure, 1.0, (y, structure.X_max))) for G in antiderivatives)
            for y in cutoffs
            if y < structure.X_max
        )
    return TailIntegral(
        x=x,
        value=value,
        cutoffs=tuple(cutoffs),
        values=tuple(values),
        staggered=staggered,
        spread=float(spread),
        converged=bool(converged),
        tail_norms=tail_norms,
    )


@dataclass(frozen=True)
class TailLimit:
    x: np.ndarray
    magnitudes: np.ndarray
    slope: float

    @property
    def vanishing(self):
        """Whether ``|B_n(x)|`` decreases along the grid (log-log slope < 0)."""
        return bool(self.slope < 0 and self.magnitudes[-1] < self.magnitudes[0])


def tail_limit_check(
    g_list: Sequence[Callable],
    x_grid,
    cutoffs: Sequence[float],
    tol: Tolerance = DEFAULT_TOLERANCE,
    **kwargs,
) -> TailLimit:
    """``|B_n(x)|`` over ``x_grid``; each point uses the rungs beyond it."""
    xs = np.asarray(x_grid, dtype=float)
    if xs.size < 2 or np.any(xs <= 0):
        raise InputError("Need at least two positive grid points")
    magnitudes = []
    for x in xs:
        rungs = [y for y in cutoffs if y > x]
        magnitudes.append(abs(tail_B(g_list, x, rungs, tol, **kwargs).value))
    magnitudes = np.asarray(magnitudes)
    positive = magnitudes > 0
    if positive.sum() >= 2:
        slope = fit_line(np.log(xs[positive]), np.log(magnitudes[positive]))[0]
    else:
        slope = -math.inf
    return TailLimit(x=xs, magnitudes=magnitudes, slope=float(slope))


# ----------------------------------------------------------------------
# Oscillatory operators


@dataclass(frozen=True)
class OscKernel:
    """Amplitude ``w = i / (2γ')`` and phase ``h = 2γ - ∫_0^x V/γ'``.

    Calling the kernel gives ``𝓕 = w e^{-ih} V`` on [0, X_max];
    :meth:`factor` gives ``w e^{-ih}``, the kernel of ``S``.

    """

    data: FloquetData = field(repr=False)
    V: Callable = field(repr=False)
    X_max: float
    correction: Callable = field(repr=False)
    breakpoints: Tuple[float, ...] = ()

    @property
    def E(self):
        return self.data.E

    def w(self, x):
        return 1j / (2 * self.data.gamma_prime(x))

    def h(self, x):
        return 2 * self.data.gamma(x) - self.correction(x)

    def factor(self, x):
        return self.w(x) * np.exp(-1j * self.h(x))

    def __call__(self, x):
        return self.factor(x) * self.V(x)

    def times(self, f: Callable) -> Callable:
        """``w e^{-ih} f`` as a callable carrying both sets of breakpoints."""
        points = tuple(_breakpoints([self, f]))
        return _Product((self.factor, f), points)


def _default_cutoffs(X_max):
    return [X_max / 8, X_max / 4, X_max / 2, X_max]


def s_operator(
    kernel: OscKernel,
    f: Callable,
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    cutoffs: Optional[Sequence[float]] = None,
    width: float = 0.5,
) -> complex:
    """``S(f)(E) = ∫_0^∞ w e^{-ih} f dx`` with ``E`` the kernel energy.

    The integral is cut off along ``cutoffs`` (default: ``X_max / 8`` up
    to ``X_max``); an unsettled tail is logged, not raised.

    """
    cutoffs = _default_cutoffs(kernel.X_max) if cutoffs is None else cutoffs
    if max(cutoffs) > kernel.X_max:
        raise InputError(f"Cutoffs exceed the kernel range {kernel.X_max}")
    result = tail_B([kernel.times(f)], 0.0, cutoffs, tol, width=width, max_width=width)
    return result.value


def s_star(
    kernel: OscKernel, f: Callable, y_grid, *, width: float = 0.5
) -> float:
    """``S*(f)(E) = max_y |∫_y^{X_max} w e^{-ih} f dx|`` over ``y_grid``."""
    ys = np.unique(np.asarray(y_grid, dtype=float))
    if ys.size == 0:
        raise InputError("Empty grid")
    if ys[0] < 0 or ys[-1] >= kernel.X_max:
        raise InputError(f"Grid must lie in [0, {kernel.X_max})")
    g = kernel.times(f)
    grid = PanelGrid.build(
        ys[0], kernel.X_max, width=width, breakpoints=list(ys) + list(g.breakpoints)
    )
    values = grid.edge_values(grid.evaluate(g))
    index = np.searchsorted(grid.edges, ys)
    return float(np.max(np.abs(values[-1] - values[index])))


def g_norm(
    kernel: OscKernel,
    f: Callable,
    structure: MartingaleStructure,
    s: float = 1.0,
    *,
    operator: str = "S",
    width: float = 0.5,
) -> float:
    """``G^(s) = Σ_m m^s (Σ_j |P(f χ_j^m)(E)|^2)^{1/2}`` for ``P`` in {S, S*}.

    Cells of ``structure`` must lie in the kernel range.

    """
    if structure.X_max > kernel.X_max:
        raise InputError(f"Structure extends beyond the kernel range {kernel.X_max}")
    g = kernel.times(f)
    if operator == "S":
        return b_norm(g, structure, s, width=width).value
    if operator != "S*":
        raise InputError(f"Unknown operator {operator!r}; expected 'S' or 'S*'")
    boundaries = structure.boundaries(structure.depth)
    grid = PanelGrid.build(
        0.0,
        structure.X_max,
        width=width,
        breakpoints=list(boundaries) + list(g.breakpoints),
    )
    values = grid.edge_values(grid.evaluate(g))
    total = 0.0
    for m in range(1, structure.depth + 1):
        index = np.searchsorted(grid.edges, structure.boundaries(m))
        sups = [
            np.max(np.abs(values[ib] - values[ia : ib + 1]))
            for ia, ib in zip(index[:-1], index[1:])
        ]
        total += m**s * math.sqrt(float(np.sum(np.square(sups))))
    return total
