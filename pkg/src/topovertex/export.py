"""CSV, PGM and metadata writers.

All text is UTF-8 with LF line endings and floats carry 17 significant
digits, so identical inputs give byte-identical files.
"""

import csv
import json
from pathlib import Path

import numpy as np

from . import __version__


def fmt(v):
    v = float(v)
    if np.isnan(v):
        return ""
    return format(v, ".17g")


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_field_csv(path, grid, values):
    """One row ``i,j,x,y,value`` per node with a finite value (masked nodes are skipped)."""
    values = np.asarray(values, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["i", "j", "x", "y", "value"])
        for i in range(values.shape[0]):
            for j in range(values.shape[1]):
                v = values[i, j]
                if np.isfinite(v):
                    w.writerow([i, j, fmt(grid.x[i]), fmt(grid.y[j]), fmt(v)])
    return Path(path)


def write_ranking_csv(path, entries):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["rank", "min_value", "angles", "argmin_i", "argmin_j", "x", "y",
                    "label", "label_distance_px"])
        for e in entries:
            angles = ";".join(format(a, "g") for a in e.angles)
            w.writerow([e.rank, fmt(e.min_value), angles, e.argmin[0], e.argmin[1],
                        fmt(e.xy[0]), fmt(e.xy[1]), e.label, fmt(e.label_distance)])
    return Path(path)


def to_gray(values, mode="minmax"):
    """8-bit gray levels, image rows top to bottom.

    ``mode="minmax"`` maps min to 0 and max to 255. ``mode="negative"`` first
    clips at 0, then maps the minimum to 0 and 0 to 255. NaN becomes 255.
    """
    v = np.asarray(values, dtype=float)
    finite = np.isfinite(v)
    if mode == "negative":
        v = np.minimum(v, 0.0)
        lo, hi = (v[finite].min() if finite.any() else 0.0), 0.0
    elif mode == "minmax":
        lo, hi = (v[finite].min(), v[finite].max()) if finite.any() else (0.0, 0.0)
    else:
        raise ValueError(f"unknown scaling mode {mode!r}")
    span = hi - lo
    g = np.zeros(v.shape) if span <= 0.0 else (np.where(finite, v, hi) - lo) / span
    g = np.where(finite, g, 1.0)
    gray = np.clip(np.rint(255.0 * g), 0, 255).astype(np.uint8)
    # values are indexed [i, j] = (x, y); images go row by row from the top
    return np.ascontiguousarray(gray[:, ::-1].T)


def write_pgm(path, values, mode="minmax"):
    gray = to_gray(values, mode)
    rows, cols = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())
    return Path(path)


def read_pgm(path):
    """Read an 8-bit binary PGM written by :func:`write_pgm`."""
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    cols, rows, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    return np.frombuffer(parts[4], dtype=np.uint8, count=rows * cols).reshape(rows, cols)


def write_metadata(path, config):
    doc = {"version": __version__, **config}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return Path(path)


def sidecar(path):
    path = Path(path)
    return path.with_name(path.name + ".meta.json")
