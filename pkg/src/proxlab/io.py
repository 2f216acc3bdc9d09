"""Plain-text matrices (whitespace separated, one row per line) and trace CSVs."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def read_matrix(path) -> np.ndarray:
    """Read a whitespace-separated matrix; a single line gives a 1 x n matrix."""
    a = np.loadtxt(path, dtype=float, ndmin=2)
    return a


def write_matrix(path, a) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    np.savetxt(path, a, fmt="%.17g")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, default=_to_builtin, allow_nan=False)


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_json(obj))
        fh.write("\n")


def _clean(o):
    """Recursively map NaN to null and infinities to the strings "inf"/"-inf"."""
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, (float, np.floating)):
        v = float(o)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def _to_builtin(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(v) for v in row] for row in r]
    return header, np.array(data, dtype=float).reshape(-1, len(header))


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))
