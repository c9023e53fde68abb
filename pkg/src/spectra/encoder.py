"""Result encoding

JSON passes through to the stdlib `json` module with handling of numpy
values, complex numbers, result dataclasses and :class:`RunConfig`
objects. Tables are written as CSV with ``#``-prefixed header comment
lines; floats are written in ``repr`` form so identical runs produce
identical files.

    >>> encode({"m": 1 + 2j, "x": np.float64(0.5)}, sort_keys=True)
    '{"m": {"re": 1.0, "im": 2.0}, "x": 0.5}'

"""
import dataclasses
import json
from typing import Iterable, Sequence, TextIO

import numpy as np
import pandas as pd

from .obj import RunConfig


__all__ = ["encode", "encode_to_file", "Encoder", "write_csv", "write_json"]


class Encoder(json.JSONEncoder):
    """JSON encoder for numpy values, complex numbers and result objects."""

    def default(self, obj):
        if isinstance(obj, RunConfig):
            return dict(obj)
        if isinstance(obj, (complex, np.complexfloating)):
            return {"re": float(obj.real), "im": float(obj.imag)}
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        # NOTE: Fields declared with repr=False hold solver internals
        if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
            return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj) if f.repr}
        return super().default(obj)


def encode(obj, *, cls=Encoder, **options) -> str:
    """Encode ``obj`` as a JSON string; ``options`` go to the encoder."""
    return cls(**options).encode(obj)


def encode_to_file(obj, fp: TextIO, *, cls=Encoder, **options):
    for chunk in cls(**options).iterencode(obj):
        fp.write(chunk)


def _float_repr(value):
    return repr(float(value))


def write_csv(
    fp: TextIO, columns: Sequence[str], rows: Iterable[Sequence], *, comments: Sequence[str] = ()
):
    """Write ``#`` comment lines, one header row, then one row per sample."""
    for line in comments:
        fp.write(f"# {line}\n")
    frame = pd.DataFrame(list(rows), columns=list(columns))
    frame.to_csv(fp, index=False, float_format=_float_repr, na_rep="nan", lineterminator="\n")


def write_json(
    fp: TextIO, columns: Sequence[str], rows: Iterable[Sequence], *, header: dict, summary=None
):
    """Write the header fields, the rows as objects and an optional summary."""
    document = dict(header)
    document["rows"] = [dict(zip(columns, row)) for row in rows]
    if summary is not None:
        document["summary"] = summary
    encode_to_file(document, fp, indent=2, ensure_ascii=False)
    fp.write("\n")
