"""Piecewise-constant synthetic images.

A scene is a list of polygonal regions (several polygons may share one
region id), an intensity per region id and a background id that covers
whatever no polygon claims. Nodes on a shared edge take the lowest id.

Scene geometry lives in normalised coordinates ``[0, 1]^2``; rasterisation
maps any square grid onto it. Images use pixel units (``h = 1``).
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import polygon as pg
from .errors import DimensionError, ParameterError
from .grid_fem import Grid2D, ScalarField

IntensityField = ScalarField

# cube: front face R1, top face R2, right face R3, background R4
CUBE_VERTICES = {
    "A": (0.25, 0.15),
    "B": (0.25, 0.55),
    "C": (0.45, 0.75),
    "D": (0.85, 0.75),
    "E": (0.65, 0.55),
    "F": (0.85, 0.35),
    "G": (0.65, 0.15),
}
CUBE_EDGES = ["AB", "AG", "BE", "BC", "CD", "DE", "DF", "EG", "FG"]

# small cube (R1 front, R2 top, R3 right) occluding a bar (R4 front, R5 top,
# R6 right); R7 is the background
OVERLAP_JUNCTIONS = {
    "T1": (0.40, 0.65),
    "T2": (0.55, 0.65),
    "T3": (0.40, 0.20),
    "T4": (0.55, 0.30),
}
_OVERLAP_REGIONS = [
    (1, [(0.15, 0.20), (0.45, 0.20), (0.45, 0.50), (0.15, 0.50)]),
    (2, [(0.15, 0.50), (0.45, 0.50), (0.60, 0.65), (0.30, 0.65)]),
    (3, [(0.45, 0.20), (0.60, 0.35), (0.60, 0.65), (0.45, 0.50)]),
    (4, [(0.40, 0.12), (0.55, 0.12), (0.55, 0.30), (0.45, 0.20), (0.40, 0.20)]),
    (4, [(0.40, 0.65), (0.55, 0.65), (0.55, 0.75), (0.40, 0.75)]),
    (5, [(0.40, 0.75), (0.55, 0.75), (0.70, 0.90), (0.55, 0.90)]),
    (6, [(0.55, 0.12), (0.70, 0.27), (0.70, 0.90), (0.55, 0.75),
         (0.55, 0.65), (0.60, 0.65), (0.60, 0.35), (0.55, 0.30)]),
]
_OVERLAP_EDGES = {
    "(T1T2)": ((0.40, 0.65), (0.55, 0.65)),
    "(T3T4)": ((0.40, 0.20), (0.45, 0.20)),
}


@dataclass(frozen=True, eq=False)
class SceneSpec:
    regions: tuple
    intensities: tuple
    background_id: int
    labels: dict = field(default_factory=dict)
    edge_labels: dict = field(default_factory=dict)
    name: str = "custom"

    def __post_init__(self):
        regions = tuple((int(rid), pg.as_polygon(poly)) for rid, poly in self.regions)
        ids = {rid for rid, _ in regions} | {int(self.background_id)}
        n = len(self.intensities)
        if ids != set(range(1, n + 1)):
            raise DimensionError(f"region ids {sorted(ids)} do not match {n} intensities (expected 1..{n})")
        for rid, poly in regions:
            if pg.signed_area(poly) <= 0.0:
                raise ParameterError(f"region {rid} polygon must be counterclockwise")
            if not pg.is_simple(poly):
                raise ParameterError(f"region {rid} polygon is not simple")
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "intensities", tuple(float(v) for v in self.intensities))
        object.__setattr__(self, "background_id", int(self.background_id))

    @property
    def n_regions(self):
        return len(self.intensities)

    def intensity(self, region_id):
        return self.intensities[region_id - 1]

    def with_intensities(self, intensities):
        return SceneSpec(self.regions, tuple(intensities), self.background_id,
                         self.labels, self.edge_labels, self.name)

    def mirrored(self):
        """Mirror image about ``x = 1/2`` (vertex order reversed to stay CCW)."""
        def flip(p):
            q = np.asarray(p, dtype=float).copy()
            q[..., 0] = 1.0 - q[..., 0]
            return q

        regions = tuple((rid, flip(poly)[::-1]) for rid, poly in self.regions)
        labels = {k: tuple(flip(v)) for k, v in self.labels.items()}
        edges = {k: (tuple(flip(a)), tuple(flip(b))) for k, (a, b) in self.edge_labels.items()}
        return SceneSpec(regions, self.intensities, self.background_id, labels, edges, self.name + "-mirrored")

    def to_json(self):
        return {
            "name": self.name,
            "regions": [{"id": rid, "polygon": poly.tolist()} for rid, poly in self.regions],
            "intensities": list(self.intensities),
            "background_id": self.background_id,
            "labels": {k: list(v) for k, v in self.labels.items()},
            "edge_labels": {k: [list(a), list(b)] for k, (a, b) in self.edge_labels.items()},
        }


def _cube(intensities):
    v = CUBE_VERTICES
    regions = [
        (1, [v["A"], v["G"], v["E"], v["B"]]),
        (2, [v["B"], v["E"], v["D"], v["C"]]),
        (3, [v["G"], v["F"], v["D"], v["E"]]),
    ]
    edges = {f"({e})": (v[e[0]], v[e[1]]) for e in CUBE_EDGES}
    return SceneSpec(tuple(regions), tuple(intensities), 4, dict(v), edges, "cube")


def _overlapping_cubes(intensities):
    return SceneSpec(tuple(_OVERLAP_REGIONS), tuple(intensities), 7, dict(OVERLAP_JUNCTIONS),
                     dict(_OVERLAP_EDGES), "overlapping_cubes")


BUILTIN = {"cube": (4, _cube), "overlapping_cubes": (7, _overlapping_cubes)}


def builtin_scene(name, intensities):
    """``cube`` (4 intensities) or ``overlapping_cubes`` (7 intensities)."""
    if name not in BUILTIN:
        raise ParameterError(f"unknown scene {name!r}; choose from {sorted(BUILTIN)}")
    n, make = BUILTIN[name]
    if len(intensities) != n:
        raise DimensionError(f"scene {name!r} needs {n} intensities, got {len(intensities)}")
    return make(intensities)


def to_unit(grid, points):
    """Map physical grid coordinates to normalised scene coordinates."""
    lo = np.array([grid.x[0], grid.y[0]])
    ext = np.array([grid.x[-1] - grid.x[0], grid.y[-1] - grid.y[0]])
    return (np.asarray(points, dtype=float) - lo) / ext


def to_physical(grid, points):
    lo = np.array([grid.x[0], grid.y[0]])
    ext = np.array([grid.x[-1] - grid.x[0], grid.y[-1] - grid.y[0]])
    return lo + np.asarray(points, dtype=float) * ext


def rasterize(spec, grid):
    """Nodal intensity field: each node takes the value of the region containing it."""
    pts = to_unit(grid, grid.nodes())
    region = np.zeros(grid.shape, dtype=int)
    for rid in sorted({rid for rid, _ in spec.regions}):
        hit = np.zeros(grid.shape, dtype=bool)
        for r, poly in spec.regions:
            if r == rid:
                hit |= pg.contains(poly, pts, include_boundary=True)
        region[(region == 0) & hit] = rid
    region[region == 0] = spec.background_id
    values = np.asarray(spec.intensities)[region - 1]
    return ScalarField(grid, values)


def image_grid(pixels=100):
    """Node grid of a ``pixels x pixels`` image: ``[0, pixels]^2`` with unit spacing."""
    return Grid2D.uniform(pixels, 0.0, float(pixels))


def load_scene(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        regions = tuple((r["id"], r["polygon"]) for r in doc["regions"])
        labels = {k: tuple(v) for k, v in doc.get("labels", {}).items()}
        edges = {k: (tuple(a), tuple(b)) for k, (a, b) in doc.get("edge_labels", {}).items()}
        return SceneSpec(regions, tuple(doc["intensities"]), doc["background_id"], labels, edges,
                         doc.get("name", Path(path).stem))
    except (KeyError, TypeError) as exc:
        raise ParameterError(f"{path}: malformed scene file ({exc})") from exc


def save_scene(spec, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(spec.to_json(), fh, indent=1)
        fh.write("\n")
