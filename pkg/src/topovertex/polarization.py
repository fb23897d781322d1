"""Weak polarization matrices and their on-disk cache.

Matrices of second-order tensors use the row-major ``vec`` convention:
``vec(a (x) b) = (a1 b1, a1 b2, a2 b1, a2 b2)``. With it,
``vec(H)^T (I2 (x) m) g == g^T H m`` for symmetric ``H``.
"""

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import exterior
from .errors import ConsistencyError, StaleCacheError
from .inclusion import build_inclusion

log = logging.getLogger(__name__)

TOL_SYM = 0.02
SUFFIX = ".pol.json"


def kron_identity(m):
    """``I2 (x) m`` as a 4x2 matrix: rows ``(m1,0), (m2,0), (0,m1), (0,m2)``."""
    m = np.asarray(m, dtype=float)
    return np.kron(np.eye(2), m.reshape(2, 1))


def polarization_key(angles, w, params, grid_params):
    """Everything the polarization data depend on, as a JSON-friendly dict."""
    key = {
        "angles": [float(a) for a in angles],
        "w": float(w),
        "alpha": float(params.alpha),
        "lambda_in": float(params.lambda_in),
        "lambda_out": float(params.lambda_out),
    }
    for name in ("R", "h_f", "L_f", "rho", "h_max"):
        key[name] = float(grid_params[name])
    return key


def key_hash(key):
    blob = json.dumps(key, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True, eq=False)
class PolarizationData:
    shape_id: str
    P1: np.ndarray
    P2: np.ndarray
    X: np.ndarray
    area: float
    centroid: np.ndarray
    key: dict = field(default_factory=dict)

    @property
    def hash(self):
        return key_hash(self.key)

    @property
    def angles(self):
        return list(self.key.get("angles", []))

    def matches(self, params):
        return (self.key.get("alpha") == float(params.alpha)
                and self.key.get("lambda_in") == float(params.lambda_in)
                and self.key.get("lambda_out") == float(params.lambda_out))

    def classical(self):
        """Classical polarization matrix ``(l_in - l_out) / l_out * (I2 + P1)``."""
        li, lo = self.key["lambda_in"], self.key["lambda_out"]
        return (li - lo) / lo * (np.eye(2) + self.P1)

    def to_json(self):
        return {
            "shape_id": self.shape_id,
            **self.key,
            "P1": self.P1.tolist(),
            "P2": self.P2.tolist(),
            "X": self.X.tolist(),
            "area": self.area,
            "centroid": self.centroid.tolist(),
            "hash": self.hash,
        }

    @classmethod
    def from_json(cls, doc):
        key_fields = ("angles", "w", "alpha", "lambda_in", "lambda_out", "R", "h_f", "L_f", "rho", "h_max")
        key = {k: doc[k] for k in key_fields}
        data = cls(doc["shape_id"], np.array(doc["P1"], dtype=float), np.array(doc["P2"], dtype=float),
                   np.array(doc["X"], dtype=float), float(doc["area"]),
                   np.array(doc["centroid"], dtype=float), key)
        if data.hash != doc["hash"]:
            raise StaleCacheError(f"{doc['shape_id']}: stored hash does not match its parameters")
        return data


def compute_polarization(shape, correctors):
    """``P1``, ``P2`` from theta-weighted element means of the corrector gradients.

    ``|w|`` and the centroid (hence ``X``) come from exact polygon moments.
    """
    if correctors.shape is not shape and correctors.shape.id != shape.id:
        raise ConsistencyError(f"correctors were solved for {correctors.shape.id}, not {shape.id}")
    grid = correctors.grid
    theta = correctors.coeff.theta
    weights = theta * grid.element_areas()                  # theta_e |e|
    grads = correctors.mean_gradients()                     # (k, ex, ey, i)
    xc = grid.element_centroids()                           # (ex, ey, j)
    area = shape.area
    centroid = shape.centroid
    P1 = np.einsum("ab,kabi->ik", weights, grads) / area
    P2 = np.einsum("ab,kabi,abj->ijk", weights, grads, xc).reshape(4, 2) / area
    X = kron_identity(centroid)
    gp = grid.params if hasattr(grid, "params") else {}
    key = polarization_key(shape.angles, shape.width, correctors.params, gp) if gp else {}
    return PolarizationData(shape.id, P1, P2, X, float(area), centroid, key)


def precompute(shape, params, grid=None):
    """Solve both correctors for ``shape`` and reduce them to polarization data."""
    if grid is None:
        grid = exterior.build_graded_grid()
    pair = exterior.solve_correctors(shape, params, grid)
    return compute_polarization(shape, pair)


# -- cache ------------------------------------------------------------------

def cache_filename(shape_id, key):
    return f"{shape_id}-{key_hash(key)[:8]}{SUFFIX}"


def cache_store(data, directory):
    """Atomically write ``data`` into ``directory``; returns the file path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / cache_filename(data.shape_id, data.key)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=SUFFIX)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(data.to_json(), fh, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def cache_load(shape_id, key, directory):
    """Load cached data for ``shape_id`` computed under ``key``.

    Raises :class:`StaleCacheError` when only entries for other parameters
    exist and :class:`FileNotFoundError` when there is nothing at all.
    """
    directory = Path(directory)
    path = directory / cache_filename(shape_id, key)
    if not path.exists():
        others = sorted(directory.glob(f"{glob_escape(shape_id)}-*{SUFFIX}")) if directory.exists() else []
        if others:
            raise StaleCacheError(f"{shape_id}: cache in {directory} was computed with other parameters "
                                  f"({others[0].name}); recompute")
        raise FileNotFoundError(f"no cached polarization data for {shape_id} in {directory}")
    with open(path, encoding="utf-8") as fh:
        data = PolarizationData.from_json(json.load(fh))
    if data.hash != key_hash(key):
        raise StaleCacheError(f"{path.name}: parameter hash mismatch")
    return data


def glob_escape(text):
    return "".join(f"[{c}]" if c in "[]*?" else c for c in text)


def load_or_compute(shape, params, cache_dir=None, grid=None, recompute=False):
    """Cached polarization data for ``shape``; computes and stores on a miss.

    A stale entry raises unless ``recompute`` is set.
    """
    if grid is None:
        grid = exterior.build_graded_grid()
    key = polarization_key(shape.angles, shape.width, params, grid.params)
    if cache_dir is not None and not recompute:
        try:
            return cache_load(shape.id, key, cache_dir)
        except FileNotFoundError:
            pass
    data = precompute(shape, params, grid)
    if cache_dir is not None:
        cache_store(data, cache_dir)
    return data


def shape_from_data(data):
    return build_inclusion(data.angles, data.key["w"])
