"""Polygonal inclusion shapes built by thickening fans of unit rays.

A shape with rays at angles ``a1 < a2 < ...`` (degrees) is the union of
strips of width ``w`` around the unit segments from the origin, with square
caps at the ray ends and mitred joins between angularly adjacent rays.
"""

import itertools
import logging
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import polygon as pg
from .errors import ParameterError, ShapeDegeneracyError

log = logging.getLogger(__name__)

DEFAULT_WIDTH = 0.05
GAP_MIN = 10.0
MAX_JOIN_RADIUS = 0.5

_ID_RE = re.compile(r"^w\[\s*([-+0-9.eE]+(?:\s*,\s*[-+0-9.eE]+){1,3})\s*\]$")


def _unit(deg):
    """Direction vector with exact zeros and ones at multiples of 90 degrees."""
    rad = np.deg2rad(deg)
    v = np.array([np.cos(rad), np.sin(rad)])
    for k in range(2):
        for target in (-1.0, 0.0, 1.0):
            if abs(v[k] - target) < 1e-15:
                v[k] = target
    return v


def _fmt_angle(a):
    return str(int(a)) if float(a).is_integer() else f"{a:g}"


def shape_id(angles):
    return "w[" + ",".join(_fmt_angle(a) for a in angles) + "]"


def parse_shape_id(text):
    """``"w[0,90,180]"`` -> ``[0.0, 90.0, 180.0]``."""
    m = _ID_RE.match(text.strip())
    if not m:
        raise ParameterError(f"bad shape id {text!r}; expected e.g. w[0,90] or w[0,45,270]")
    return [float(a) for a in m.group(1).split(",")]


@dataclass(frozen=True, eq=False)
class InclusionShape:
    angles: tuple
    width: float
    polygon: np.ndarray
    id: str

    @cached_property
    def _moments(self):
        return pg.moments(self.polygon)

    @property
    def area(self):
        return self._moments[0]

    @property
    def centroid(self):
        """Exact polygon centroid; round-off below 1e-13 is flushed to zero.

        Centrally symmetric shapes thus get ``m = 0`` exactly.
        """
        c = self._moments[1].copy()
        c[np.abs(c) < 1e-13 * max(1.0, float(np.abs(self.polygon).max()))] = 0.0
        return c

    def rotated(self, delta):
        return build_inclusion([a + delta for a in self.angles], self.width)

    def __repr__(self):
        return f"InclusionShape({self.id}, width={self.width:g})"


def _normalise_angles(angles):
    if not 2 <= len(angles) <= 4:
        raise ParameterError(f"need 2 to 4 ray angles, got {len(angles)}")
    norm = sorted(float(a) % 360.0 for a in angles)
    gaps = [b - a for a, b in zip(norm, norm[1:])] + [norm[0] + 360.0 - norm[-1]]
    if min(gaps) <= 1e-9:
        raise ParameterError(f"ray angles {list(angles)} are not distinct modulo 360")
    if min(gaps) < GAP_MIN - 1e-9:
        raise ShapeDegeneracyError(
            f"angular gap {min(gaps):g} deg below the {GAP_MIN:g} deg minimum for {list(angles)}")
    return norm, gaps


def build_inclusion(angles, w=DEFAULT_WIDTH):
    """Thicken the unit rays at ``angles`` (degrees) into a CCW simple polygon."""
    if not w > 0.0:
        raise ParameterError("width must be positive")
    norm, gaps = _normalise_angles(angles)
    h = 0.5 * w
    dirs = [_unit(a) for a in norm]
    normals = [np.array([-d[1], d[0]]) for d in dirs]
    verts = []
    n = len(norm)
    for k in range(n):
        d, nk = dirs[k], normals[k]
        verts.append(d - h * nk)
        verts.append(d + h * nk)
        nxt = normals[(k + 1) % n]
        if abs(gaps[k] - 180.0) < 1e-9:
            # offsets are collinear; the two edges fuse
            continue
        # left offset of ray k meets right offset of ray k+1
        join = np.linalg.solve(np.array([nk, nxt]), np.array([h, -h]))
        if np.linalg.norm(join) > MAX_JOIN_RADIUS:
            raise ShapeDegeneracyError(
                f"join between rays {norm[k]:g} and {norm[(k + 1) % n]:g} lies "
                f"{np.linalg.norm(join):.3f} from the origin")
        verts.append(join)
    poly = np.array(verts)
    for k in range(2):
        poly[np.abs(poly[:, k]) < 1e-15, k] = 0.0
    if not pg.is_simple(poly):
        raise ShapeDegeneracyError(f"enlargement of {norm} self-intersects")
    if not pg.contains(poly, np.zeros(2), include_boundary=False):
        raise ShapeDegeneracyError(f"origin is not inside the enlargement of {norm}")
    poly.setflags(write=False)
    return InclusionShape(tuple(norm), float(w), poly, shape_id(norm))


def polygon_moments(shape):
    """Exact ``(area, centroid)`` of the shape polygon."""
    return pg.moments(shape.polygon)


def disk_shape(n=64, radius=1.0):
    """Regular ``n``-gon inscribed in a circle; the reference for polarization checks.

    Not part of any shape set. ``width`` holds the diameter so that the
    resolution warning of the perturbed state still makes sense.
    """
    if n < 8:
        raise ParameterError("a disk needs at least 8 vertices")
    t = 2.0 * np.pi * np.arange(n) / n
    poly = radius * np.column_stack([np.cos(t), np.sin(t)])
    return InclusionShape((), 2.0 * radius, poly, f"disk{n}")


@dataclass(frozen=True)
class ShapeSet:
    shapes: tuple
    m: int
    line_counts: tuple
    width: float

    def __iter__(self):
        return iter(self.shapes)

    def __len__(self):
        return len(self.shapes)

    def __getitem__(self, k):
        return self.shapes[k]

    @property
    def ids(self):
        return [s.id for s in self.shapes]


def generate_theta(m, line_counts=(2, 3), w=DEFAULT_WIDTH):
    """All shapes whose rays sit on the ``m``-fold angular subdivision.

    Shapes that fail the degeneracy checks are skipped and logged.
    """
    if m < 3:
        raise ParameterError("m must be at least 3")
    if 360.0 / m < GAP_MIN:
        raise ParameterError(f"angular precision {360.0 / m:g} deg is below {GAP_MIN:g} deg")
    counts = tuple(sorted(set(int(c) for c in line_counts)))
    if not counts or any(c not in (2, 3, 4) for c in counts):
        raise ParameterError(f"line counts must be a subset of {{2, 3, 4}}, got {line_counts}")
    step = 360.0 / m
    shapes = []
    for c in counts:
        for combo in itertools.combinations(range(m), c):
            angles = [j * step for j in combo]
            try:
                shapes.append(build_inclusion(angles, w))
            except ShapeDegeneracyError as exc:
                log.info("skipping %s: %s", shape_id(angles), exc)
    return ShapeSet(tuple(shapes), m, counts, float(w))
