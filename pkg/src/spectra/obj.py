import json
import types


__all__ = ["RunConfig"]


class RunConfig(types.SimpleNamespace):
    """A simple bucket of run settings.

    Items can be accessed via dotted or bracket notation::

        >>> config = RunConfig(subcommand="bands", emax=10.0)
        >>> config.emax
        10.0
        >>> config["subcommand"]
        'bands'

    A config can be converted to a dict by calling `dict` on it::

        >>> dict(RunConfig(L=2.0))
        {'L': 2.0}

    The canonical form lists settings sorted by name as ``key=value``
    pairs with JSON values (floats in ``repr`` form) and parses back to
    an equal config::

        >>> config = RunConfig(v0="mathieu:1.0", L=2.0, nmax=6, grid=(1.0, 4.0))
        >>> config.canonical()
        'L=2.0 grid=[1.0,4.0] nmax=6 v0="mathieu:1.0"'
        >>> RunConfig.from_canonical(config.canonical()).canonical() == config.canonical()
        True

    """

    def __getitem__(self, name):
        return self.__dict__.__getitem__(name)

    def __setitem__(self, name, value):
        self.__dict__[name] = value

    def __iter__(self):
        return iter(self.__dict__.items())

    def __repr__(self):
        return repr(dict(self))

    def __str__(self):
        return str(dict(self))

    def canonical(self) -> str:
        return " ".join(
            f"{name}={json.dumps(value, ensure_ascii=False, separators=(',', ':'))}"
            for name, value in sorted(self)
        )

    @classmethod
    def from_canonical(cls, string: str) -> "RunConfig":
        decoder = json.JSONDecoder()
        settings = {}
        i = 0
        while i < len(string):
            eq = string.index("=", i)
            value, end = decoder.raw_decode(string, eq + 1)
            settings[string[i:eq]] = value
            i = end + 1
        return cls(**settings)
