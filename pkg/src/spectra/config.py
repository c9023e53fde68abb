"""Run configuration files

Config files are INI files whose values are literals understood by
:func:`spectra.descriptors.scan_value`: numbers in every form the number
scanner accepts, ``true``/``false``/``null``, double-quoted strings, and
bare strings such as potential descriptors. Lines before the first
section header belong to an implicit ``[run]`` section, so a plain list
of ``key = value`` lines is a valid config file.

Examples::

    >>> text = '''
    ... v0 = mathieu:1.0
    ... emax = PI
    ... [tol]
    ... abs = 1e-12
    ... '''
    >>> decode_ini(text)["tol"]
    {'abs': 1e-12}
    >>> decode_ini("L = 1_000")["run"]
    {'L': 1000}
    >>> sorted(flatten(decode_ini("[run]\\nv0 = zero\\ntol.rel = 1e-9")).items())
    [('rel_tol', 1e-09), ('v0', 'zero')]

"""
from configparser import ConfigParser, Error as ParserError, ExtendedInterpolation
from pathlib import Path
from typing import Union

from .descriptors import scan_value
from .exc import ConfigError


__all__ = ["decode_ini", "flatten", "load_config", "parse_ini_name"]


DEFAULT_SECTION = "run"

# Dotted config names that map to differently named options
ALIASES = {
    ("tol", "abs"): "abs_tol",
    ("tol", "rel"): "rel_tol",
    ("tol", "max_steps"): "max_steps",
}


def _has_section_header(string):
    for line in string.splitlines():
        line = line.strip()
        if not line or line[0] in "#;":
            continue
        return line.startswith("[")
    return True


def decode_ini(string: str, *, literal: bool = True) -> dict:
    """Decode INI text with literal values into nested dicts.

    With ``literal=False`` values are kept as the (stripped) text of the
    file, so that callers can apply their own conversions.

    Section and setting names are split on dots, so ``[tol]`` with
    ``abs = 1e-12`` and ``tol.abs = 1e-12`` under ``[run]`` both give
    ``{"tol": {"abs": 1e-12}}`` at their level.

        >>> decode_ini("[run]\\nv0 = zero\\ntol.rel = 1e-9")
        {'run': {'v0': 'zero', 'tol': {'rel': 1e-09}}}

    """
    if not _has_section_header(string):
        string = f"[{DEFAULT_SECTION}]\n{string}"
    parser = ConfigParser(interpolation=ExtendedInterpolation())
    parser.optionxform = lambda option: option
    try:
        parser.read_string(string)
    except ParserError as exc:
        raise ConfigError("<config>", getattr(exc, "lineno", 0), str(exc).splitlines()[0])

    result = {}
    for section_name in parser.sections():
        section = _setdefault_path(result, parse_ini_name(section_name))
        try:
            items = list(parser[section_name].items())
        except ParserError as exc:
            raise ConfigError(section_name, 0, str(exc).splitlines()[0])
        for raw_name, raw_value in items:
            *parents, name = parse_ini_name(raw_name)
            _setdefault_path(section, parents)[name] = (
                scan_value(raw_value) if literal else raw_value.strip()
            )
    return result


def _setdefault_path(obj, path):
    for segment in path:
        obj = obj.setdefault(segment, {})
        if not isinstance(obj, dict):
            raise ConfigError(".".join(path), 0, f"'{segment}' is both a value and a group")
    return obj


def parse_ini_name(name: str) -> list:
    """Split a section or setting name on dots.

        >>> parse_ini_name("tol.abs")
        ['tol', 'abs']

    """
    segments = name.strip().split(".")
    position = 0
    for segment in segments:
        if not segment.strip():
            raise ConfigError(name, position, f"Empty segment in name '{name}'")
        position += len(segment) + 1
    return [segment.strip() for segment in segments]


def _option_name(path):
    if tuple(path) in ALIASES:
        return ALIASES[tuple(path)]
    if len(path) != 1:
        raise ConfigError(".".join(path), 0, f"Unknown setting '{'.'.join(path)}'")
    return path[0].replace("-", "_")


def flatten(config: dict) -> dict:
    """Flatten decoded config into option names.

    Settings of the ``[run]`` section map to option names directly,
    everything else by its dotted path (see :data:`ALIASES`).

    """
    options = {}

    def visit(path, value):
        if isinstance(value, dict):
            for key, item in value.items():
                visit(path + [key], item)
        else:
            options[_option_name(path)] = value

    for key, value in config.items():
        visit([] if key == DEFAULT_SECTION else [key], value)
    return options


def load_config(path: Union[str, Path], *, literal: bool = True) -> dict:
    """Read a config file into a flat dict of option names."""
    path = Path(path)
    try:
        string = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), 0, f"Could not read config file: {exc.strerror}")
    return flatten(decode_ini(string, literal=literal))
