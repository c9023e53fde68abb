"""Potentials

Two classes of potentials enter the operator ``-u'' + (V0 + V) u``:

- :class:`PeriodicPotential` -- the 1-periodic background ``V0``. It is
  evaluated by reducing ``x`` modulo 1, so ``V0(x + 1) == V0(x)``
  whenever ``x + 1`` is exactly representable.

- :class:`DecayingPotential` -- the perturbation ``V`` on the half line,
  together with an envelope ``|V(x)| <= B / (1 + x)**alpha``.

:func:`truncate` cuts a decaying potential off after ``L`` (closed at
``L``).

Examples::

    >>> v0 = make_periodic("mathieu:1.0")
    >>> abs(float(v0(0.25))) < 1e-15
    True
    >>> v = make_decaying("power:1,1")
    >>> float(v(0.0)), float(v(9.0))
    (1.0, 0.1)
    >>> v.envelope
    (1.0, 1.0)
    >>> vl = truncate(v, 10)
    >>> float(vl(10.0)), float(vl(10.5))
    (0.09090909090909091, 0.0)

"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np

from .descriptors import parse_descriptor
from .exc import DescriptorError, InputError


__all__ = [
    "DecayingPotential",
    "PeriodicPotential",
    "TruncatedPotential",
    "envelope_holds",
    "make_decaying",
    "make_periodic",
    "truncate",
]


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PeriodicPotential:
    """1-periodic potential given by its values on [0, 1)."""

    function: Callable = field(repr=False)
    breakpoints: Tuple[float, ...] = ()
    descriptor: str = ""
    is_zero: bool = False

    def __call__(self, x):
        return self.function(np.mod(x, 1.0))

    def breakpoints_in(self, a, b):
        """All breakpoints ``n + t`` (t a declared breakpoint) inside (a, b)."""
        points = []
        for t in self.breakpoints or ():
            first = np.ceil(a - t)
            for n in np.arange(first, np.floor(b - t) + 1):
                point = n + t
                if a < point < b:
                    points.append(float(point))
        return sorted(points)


@dataclass(frozen=True)
class DecayingPotential:
    """Potential on the half line with envelope ``B / (1 + x)**alpha``.

    ``support`` is the right end of the support (``inf`` unless the
    potential is compactly supported). ``p`` optionally tags membership
    in ``l^p(L^1)``.

    """

    function: Callable = field(repr=False)
    amplitude: float = 0.0
    alpha: float = 1.0
    breakpoints: Tuple[float, ...] = ()
    support: float = np.inf
    p: Optional[float] = None
    descriptor: str = ""

    def __call__(self, x):
        return self.function(np.asarray(x, dtype=float))

    @property
    def envelope(self):
        return (self.amplitude, self.alpha)

    @property
    def is_zero(self):
        return self.amplitude == 0

    def bound(self, x):
        return self.amplitude / (1.0 + np.asarray(x, dtype=float)) ** self.alpha

    def in_lp(self, p):
        """Whether the envelope places the potential in ``l^p(L^1)``."""
        return np.isfinite(self.support) or self.alpha * p > 1


@dataclass(frozen=True)
class TruncatedPotential:
    """``V_L``: equal to the base potential on [0, L] and zero after."""

    base: DecayingPotential
    L: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= self.L, self.base(x), 0.0)

    @property
    def amplitude(self):
        return self.base.amplitude

    @property
    def alpha(self):
        return self.base.alpha

    @property
    def envelope(self):
        return self.base.envelope

    @property
    def is_zero(self):
        return self.base.is_zero

    @property
    def breakpoints(self):
        return tuple(sorted({b for b in self.base.breakpoints if b < self.L} | {self.L}))

    @property
    def support(self):
        return min(self.base.support, self.L)

    @property
    def descriptor(self):
        return f"{self.base.descriptor}|L={self.L!r}"

    def bound(self, x):
        return self.base.bound(x)


def _check_args(term, count, minimum=None):
    minimum = count if minimum is None else minimum
    if not minimum <= len(term.args) <= count:
        expected = count if minimum == count else f"{minimum} to {count}"
        raise DescriptorError(
            term.source, 0, f"`{term.kind}` takes {expected} arguments, got {len(term.args)}"
        )
    return [float(a) for a in term.args]


def _load_samples(term):
    path = Path(term.args[0])
    try:
        table = np.loadtxt(path, ndmin=2)
    except OSError as exc:
        raise DescriptorError(term.source, 0, f"Could not read samples: {exc}")
    except ValueError as exc:
        raise DescriptorError(term.source, 0, f"Malformed samples file: {exc}")
    if table.shape[1] != 2 or table.shape[0] < 1:
        raise DescriptorError(term.source, 0, "Samples file must have two columns")
    xs, values = table[:, 0], table[:, 1]
    if np.any(xs < 0) or np.any(xs >= 1) or np.any(np.diff(xs) <= 0):
        raise DescriptorError(
            term.source, 0, "Sample abscissae must be increasing and lie in [0, 1)"
        )
    return xs, values


def make_periodic(descriptor: str) -> PeriodicPotential:
    """Build a periodic potential from a descriptor.

    Kinds: ``zero``; ``mathieu:A`` (A cos 2πx); ``square:A,w`` (A on
    [0, w), 0 on [w, 1)); ``samples:path`` (periodic piecewise-linear
    interpolation of a two-column table). Terms can be summed with ``+``.

        >>> v0 = make_periodic("square:2,0.5")
        >>> float(v0(0.25)), float(v0(0.75)), v0.breakpoints
        (2.0, 0.0, (0.0, 0.5))

    """
    functions = []
    breakpoints = set()
    for term in parse_descriptor(descriptor):
        if term.kind == "zero":
            _check_args(term, 0)
            continue
        elif term.kind == "mathieu":
            (amplitude,) = _check_args(term, 1)
            if amplitude == 0:
                continue
            functions.append(lambda t, a=amplitude: a * np.cos(2 * np.pi * t))
        elif term.kind == "square":
            height, width = _check_args(term, 2)
            if not 0 <= width <= 1:
                raise DescriptorError(term.source, 0, "Square width must lie in [0, 1]")
            if height == 0:
                continue
            functions.append(lambda t, h=height, w=width: np.where(t < w, h, 0.0))
            if 0 < width < 1:
                breakpoints.update((0.0, width))
        elif term.kind == "samples":
            xs, values = _load_samples(term)
            functions.append(lambda t, xs=xs, fs=values: np.interp(t, xs, fs, period=1.0))
            breakpoints.update(float(x) for x in xs)
        else:
            raise DescriptorError(term.source, 0, f"Unknown periodic potential `{term.kind}`")

    if not functions:
        return PeriodicPotential(
            function=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            descriptor=descriptor.strip(),
            is_zero=True,
        )

    def function(t):
        t = np.asarray(t, dtype=float)
        total = np.zeros_like(t)
        for f in functions:
            total = total + f(t)
        return total

    return PeriodicPotential(
        function=function,
        breakpoints=tuple(sorted(breakpoints)),
        descriptor=descriptor.strip(),
    )


def _exp_envelope(alpha, rate):
    """``sup_{x >= 0} (1 + x)**alpha e^{-rate x}``."""
    peak = alpha / rate
    if peak <= 1:
        return 1.0
    return float(peak**alpha * np.exp(rate - alpha))


def make_decaying(descriptor: str, *, p: Optional[float] = None) -> DecayingPotential:
    """Build a decaying potential from a descriptor.

    Kinds: ``zero``; ``power:c,alpha`` (c/(1+x)^alpha);
    ``wvn:c,omega,alpha[,phi]`` (c sin(2 omega x + phi)/(1+x)^alpha);
    ``bump:c,a,b`` (c on [a, b]); ``exp:c,rate`` (c e^{-rate x}). Terms can
    be summed with ``+``.

    The envelope exponent of a sum is the smallest exponent of its
    decaying terms (1 when there are none) and the amplitude is the sum
    of the term amplitudes, a bump on [a, b] contributing
    ``|c| (1 + b)**alpha`` and an exponential
    ``|c| sup_x (1 + x)**alpha e^{-rate x}``.

        >>> make_decaying("power:2,0.5 + wvn:1,1,1").envelope
        (3.0, 0.5)
        >>> make_decaying("bump:5,0,1").envelope
        (10.0, 1.0)
        >>> make_decaying("zero").envelope
        (0.0, 1.0)
        >>> make_decaying("exp:2,1").envelope
        (2.0, 1.0)

    """
    decaying = []
    bumps = []
    exponentials = []
    breakpoints = set()
    for term in parse_descriptor(descriptor):
        if term.kind == "zero":
            _check_args(term, 0)
        elif term.kind == "power":
            c, alpha = _check_args(term, 2)
            decaying.append((c, alpha, lambda x, c=c, a=alpha: c / (1 + x) ** a))
        elif term.kind == "wvn":
            c, omega, alpha, phi = (_check_args(term, 4, 3) + [0.0])[:4]

            def wvn(x, c=c, w=omega, a=alpha, f=phi):
                return c * np.sin(2 * w * x + f) / (1 + x) ** a

            decaying.append((c, alpha, wvn))
        elif term.kind == "bump":
            c, a, b = _check_args(term, 3)
            if not 0 <= a < b:
                raise DescriptorError(term.source, 0, "Bump needs 0 <= a < b")
            bumps.append((c, a, b))
            breakpoints.update(point for point in (a, b) if point > 0)
        elif term.kind == "exp":
            c, rate = _check_args(term, 2)
            if not rate > 0:
                raise DescriptorError(term.source, 0, "Exponential rate must be positive")
            exponentials.append((c, rate))
        else:
            raise DescriptorError(term.source, 0, f"Unknown decaying potential `{term.kind}`")

    for c, alpha, _ in decaying:
        if alpha < 0:
            message = f"Decay exponent must be non-negative, got {alpha}"
            raise DescriptorError(descriptor, 0, message)

    alpha = min((a for _, a, _ in decaying), default=1.0)
    amplitude = sum(abs(c) for c, _, _ in decaying)
    amplitude += sum(abs(c) * (1 + b) ** alpha for c, _, b in bumps)
    amplitude += sum(abs(c) * _exp_envelope(alpha, rate) for c, rate in exponentials)
    support = np.inf if decaying or exponentials else max((b for _, _, b in bumps), default=0.0)
    if p is not None and not (np.isfinite(support) or alpha * p > 1):
        raise InputError(f"Envelope exponent {alpha} does not place the potential in l^{p}(L^1)")

    def function(x):
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for _, _, f in decaying:
            total = total + f(x)
        for c, a, b in bumps:
            total = total + np.where((x >= a) & (x <= b), c, 0.0)
        for c, rate in exponentials:
            total = total + c * np.exp(-rate * x)
        return total

    return DecayingPotential(
        function=function,
        amplitude=float(amplitude),
        alpha=float(alpha),
        breakpoints=tuple(sorted(breakpoints)),
        support=float(support),
        p=p,
        descriptor=descriptor.strip(),
    )


def truncate(V: DecayingPotential, L: float) -> TruncatedPotential:
    """Cut ``V`` off after ``L``; ``V_L(L) = V(L)``."""
    if not np.isfinite(L) or L <= 0:
        raise InputError(f"Truncation point must be positive, got {L!r}", L=L)
    if isinstance(V, TruncatedPotential):
        return TruncatedPotential(V.base, min(V.L, float(L)))
    return TruncatedPotential(V, float(L))


def envelope_holds(V, xs, slack=1e-12):
    """Spot-check ``|V(x)| (1 + x)**alpha <= B (1 + slack)`` on ``xs``."""
    xs = np.asarray(xs, dtype=float)
    scaled = np.abs(V(xs)) * (1 + xs) ** V.alpha
    return bool(np.all(scaled <= V.amplitude * (1 + slack) + 1e-300))
