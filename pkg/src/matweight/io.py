"""CSV rasters with a JSON grid header, and JSON report helpers."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import GridMismatchError
from .fields import Grid, ScalarField, SpdField, VectorField

FORMAT = "matweight-field/1"


def _kind(field):
    if isinstance(field, ScalarField):
        return "scalar", field.values[..., None]
    if isinstance(field, SpdField):
        d = field.d
        return "spd", field.matrices.reshape(field.grid.shape + (d * d,))
    if isinstance(field, VectorField):
        return "vector", field.values
    if isinstance(field, np.ndarray):
        return "raw", np.asarray(field, dtype=float)[..., None]
    raise TypeError(f"cannot serialize {type(field).__name__}")


def write_field(path, field, grid: Grid | None = None, name: str = "value") -> tuple:
    """Write ``<path>.csv`` (one row per cell) and ``<path>.json`` (grid header).

    Rows hold the cell-center coordinates followed by the values; matrices
    are flattened row-major.  Cells are listed in lexicographic order.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    kind, flat = _kind(field)
    g = grid if grid is not None else field.grid
    if flat.shape[:-1] != g.shape:
        raise GridMismatchError("values do not match the grid")
    m = flat.shape[-1]
    coords = [f"x{k + 1}" for k in range(g.n)]
    cols = [name] if m == 1 else [f"{name}{i}" for i in range(m)]
    header = {"format": FORMAT, "kind": kind, "grid": g.to_json(), "columns": coords + cols}
    if kind == "spd":
        header["d"] = field.d
    C = g.centers().reshape(-1, g.n)
    V = flat.reshape(-1, m)
    with open(path.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(coords + cols)
        for c, v in zip(C, V):
            w.writerow([repr(float(x)) for x in c] + [repr(float(x)) for x in v])
    with open(path.with_suffix(".json"), "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path.with_suffix(".csv"), path.with_suffix(".json")


def read_field(path):
    """Inverse of :func:`write_field`."""
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    if header.get("format") != FORMAT:
        raise ValueError(f"{path}: not a {FORMAT} file")
    g = Grid.from_json(header["grid"])
    data = np.loadtxt(path.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
    vals = data[:, g.n:].reshape(g.shape + (-1,))
    kind = header["kind"]
    if kind == "scalar":
        return ScalarField(g, vals[..., 0])
    if kind == "spd":
        d = header["d"]
        return SpdField(g, vals.reshape(g.shape + (d, d)))
    if kind == "vector":
        return VectorField(g, vals)
    return vals[..., 0]


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if hasattr(obj, "to_json"):
        return _clean(obj.to_json())
    return obj


def dump_json(obj, path=None) -> str:
    """Deterministic JSON (sorted keys, non-finite floats as strings)."""
    text = json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def write_table(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return path
