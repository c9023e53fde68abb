"""Descriptor mini-language

Potentials are named on the command line and in config files by short
descriptor strings, so that every run can be reproduced from a single
string::

    zero
    mathieu:1.0
    square:2, 0.5
    power:1,0.9 + bump:5,0,1
    samples:path/to/table.txt

A descriptor is a ``+``-separated sum of terms; each term is a kind
followed by an optional ``:`` and comma-separated arguments. Numeric
arguments accept every literal the number scanner understands:

- Decimal ints and floats, with underscore separators and unary plus
- Binary, octal, and hex ints
- Constants: inf, nan, E, π, PI, τ, TAU

Examples::

    >>> parse_descriptor("mathieu:1.0")
    [Term(kind='mathieu', args=(1.0,), source='mathieu:1.0')]
    >>> [term.kind for term in parse_descriptor("power:1,1 + bump:5,0,1")]
    ['power', 'bump']
    >>> parse_descriptor("wvn:1, PI, 1")[0].args[1]
    3.141592653589793
    >>> scan_value("1_000"), scan_value("true"), scan_value("mathieu:2")
    (1000, True, 'mathieu:2')

"""
import json
import math
import re
from dataclasses import dataclass
from functools import partial
from typing import List, Tuple, Union

from .exc import DescriptorError


__all__ = ["Term", "parse_descriptor", "scan_number", "scan_value"]


Number = Union[int, float]


WHITESPACE = " \f\n\r\t\v"
WHITESPACE_RE = re.compile(r"[ \f\n\r\t\v]*")
KIND_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def skip_whitespace(string, i, *, whitespace=WHITESPACE, whitespace_re=WHITESPACE_RE) -> int:
    if string[i : i + 1] in whitespace:
        i = whitespace_re.match(string, i).end()
    return i


DECIMAL = r"[0-9](_?[0-9]+)*"
FLOAT_WITH_EXP = rf"{DECIMAL}(\.{DECIMAL})?[eE][+-]?{DECIMAL}"
FLOAT_WITHOUT_EXP = rf"({DECIMAL})?\.{DECIMAL}"
FLOAT = rf"[+-]?({FLOAT_WITH_EXP}|{FLOAT_WITHOUT_EXP})"

# Regex, converter (const or callable), const flag
# NOTE: The order of these items matters!
NUMBER_CONVERTERS = (
    # Constants
    (re.compile(r"([+-])?(inf|Infinity)"), math.inf, True),
    (re.compile(r"([+-])?(nan|NaN)"), math.nan, True),
    (re.compile(r"([+-])?(π|PI)"), math.pi, True),
    (re.compile(r"([+-])?(τ|TAU)"), math.tau, True),
    (re.compile(r"([+-])?(E)(?![0-9A-Za-z])"), math.e, True),
    # Floats
    (re.compile(FLOAT), float, False),
    # Integers
    (re.compile(r"[+-]?0[bB]_?[0-1](_?[0-1]+)*"), partial(int, base=2), False),
    (re.compile(r"[+-]?0[oO]_?[0-7](_?[0-7]+)*"), partial(int, base=8), False),
    (re.compile(r"[+-]?0[xX]_?[0-9a-fA-F](_?[0-9a-fA-F]+)*"), partial(int, base=16), False),
    (re.compile(r"[+-]?((0(_?0+)*|[1-9](_?[0-9]+)*))"), int, False),
)


def scan_number(string, i=0, *, converters=NUMBER_CONVERTERS) -> Tuple[Number, int]:
    """Scan a number starting at ``i``; return ``(value, end)`` or None.

        >>> scan_number("0x11"), scan_number("-π"), scan_number("2.5e-3")
        ((17, 4), (-3.141592653589793, 2), (0.0025, 6))

    """
    for regex, converter, is_const in converters:
        match = regex.match(string, i)
        if match is not None:
            end = match.end()
            str_val = string[i:end]
            if is_const:
                pre = match.groups()[0] or "+"
                val = converter if pre == "+" else -converter
            else:
                try:
                    val = converter(str_val)
                except ValueError:
                    raise DescriptorError(string, i, f"Could not convert number {str_val!r}")
            return val, end
    return None


@dataclass(frozen=True)
class Term:
    kind: str
    args: Tuple
    source: str


# Kinds whose single argument is a path rather than numbers
PATH_KINDS = ("samples",)


def parse_descriptor(string: str) -> List[Term]:
    """Parse a descriptor into its terms.

    Raises :class:`DescriptorError` pointing at the offending position.

        >>> parse_descriptor("square:2,")  # doctest: +ELLIPSIS
        Traceback (most recent call last):
          ...
        spectra.exc.DescriptorError: Expected number ... (position 9)

    """
    terms = []
    i = skip_whitespace(string, 0)
    if i == len(string):
        raise DescriptorError(string, i, "Empty descriptor")
    while True:
        start = i
        match = KIND_RE.match(string, i)
        if match is None:
            raise DescriptorError(string, i, "Expected potential kind")
        kind = match.group().lower()
        i = skip_whitespace(string, match.end())
        args = []
        if string[i : i + 1] == ":":
            i = skip_whitespace(string, i + 1)
            if kind in PATH_KINDS:
                end = string.find("+", i)
                end = len(string) if end == -1 else end
                path = string[i:end].strip()
                if not path:
                    raise DescriptorError(string, i, "Expected path")
                args.append(path)
                i = end
            else:
                while True:
                    result = scan_number(string, i)
                    if result is None:
                        raise DescriptorError(string, i, "Expected number")
                    value, i = result
                    args.append(value)
                    i = skip_whitespace(string, i)
                    if string[i : i + 1] == ",":
                        i = skip_whitespace(string, i + 1)
                        continue
                    break
        terms.append(Term(kind, tuple(args), string[start:i].strip()))
        i = skip_whitespace(string, i)
        if i == len(string):
            break
        if string[i] != "+":
            raise DescriptorError(string, i, f"Unexpected char `{string[i]}`")
        i = skip_whitespace(string, i + 1)
    return terms


def scan_value(string: str):
    """Decode a config value literal.

    Numbers, ``true``/``false``/``null`` and double-quoted strings are
    decoded; anything else is kept as a bare string (descriptors).

    """
    text = string.strip()
    if text in ("true", "false", "null"):
        return {"true": True, "false": False, "null": None}[text]
    if text.startswith('"'):
        try:
            value, end = json.decoder.scanstring(text, 1)
        except json.JSONDecodeError as exc:
            raise DescriptorError(text, exc.pos, exc.msg)
        if end != len(text):
            raise DescriptorError(text, end, "Extraneous data after string")
        return value
    result = scan_number(text) if text else None
    if result is not None and result[1] == len(text):
        return result[0]
    return text
