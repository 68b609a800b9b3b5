"""Matrix CSV files and JSON reports.

Matrices are headerless comma-separated rows (LF or CRLF).  Floats are
written with 17 significant digits so that a reparse is bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from pathlib import Path
import re
import tempfile

import numpy as np

from .errors import InputError, ParseError, RaggedRows

__all__ = [
    "read_matrix_csv",
    "write_matrix_csv",
    "parse_matrix_text",
    "format_float",
    "dumps_report",
    "atomic_write",
    "matrix_digest",
]

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def parse_matrix_text(text: str) -> np.ndarray:
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ParseError("empty matrix file")
    rows = []
    width = None
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            raise ParseError("blank row inside matrix", line=i)
        fields = line.split(",")
        row = []
        for j, raw in enumerate(fields, start=1):
            tok = raw.strip()
            if not _NUMBER.match(tok):
                raise ParseError(f"not a finite decimal number: {tok!r}", line=i, column=j)
            row.append(float(tok))
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise RaggedRows(f"row has {len(row)} entries, expected {width}", line=i)
        rows.append(row)
    arr = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ParseError("matrix entry overflows double precision")
    return arr


def read_matrix_csv(path) -> np.ndarray:
    """Read a headerless CSV matrix.

    Raises
    ------
    InputError
        If the file is missing or unreadable.
    ParseError, RaggedRows
        With the offending line (and column) numbers.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read matrix file {path}: {exc}") from exc
    try:
        return parse_matrix_text(text)
    except ParseError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_csv(path, a) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    text = "".join(",".join(format_float(v) for v in row) + "\n" for row in a)
    atomic_write(path, text)


def atomic_write(path, text: str) -> None:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def matrix_digest(a) -> str:
    a = np.ascontiguousarray(a, dtype="<f8")
    h = hashlib.sha256(repr(a.shape).encode())
    h.update(a.tobytes())
    return h.hexdigest()


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "null"
        if math.isinf(x):
            return json.dumps("inf" if x > 0 else "-inf")
        text = format_float(x)
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode([obj.real, obj.imag], indent, level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_report(obj, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits; infinities become ``"inf"``."""
    return _encode(obj, indent, 0) + "\n"
