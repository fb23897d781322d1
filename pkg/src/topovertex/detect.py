"""Rank inclusion shapes by the global minimum of their second-order map.

One state solve is shared by every shape; each shape then costs one TD2
evaluation. Entries are sorted by ``(min_value, shape_id)``.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import grid_fem as fem
from . import polarization as pol
from . import polygon as pg
from .errors import ParameterError
from .exterior import build_graded_grid
from .scene import to_physical
from .tdmap import eval_td2

log = logging.getLogger(__name__)

NO_LABEL = "—"


@dataclass(frozen=True)
class RankingEntry:
    rank: int
    min_value: float
    shape_id: str
    angles: tuple
    argmin: tuple
    xy: tuple
    label: str = NO_LABEL
    label_distance: float = float("nan")


def run_detection(f, theta, params=fem.SolveParams(), cache_dir=None, margin=3,
                  threads=1, recompute=False, exterior_grid=None):
    """Rank every shape of ``theta`` for the image ``f``.

    Parameters
    ----------
    f : ScalarField
        Image on the uniform pixel grid.
    theta : iterable of InclusionShape
    cache_dir : path or None
        Polarization cache; missing entries are computed and stored.
    threads : int
        Size of the pool evaluating TD2 maps. The result does not depend on it.

    Returns
    -------
    list of RankingEntry
        The complete ranking, ascending by minimum value.
    """
    shapes = list(theta)
    if not shapes:
        raise ParameterError("the shape set is empty")
    if exterior_grid is None:
        exterior_grid = build_graded_grid()
    pols = [pol.load_or_compute(s, params, cache_dir, exterior_grid, recompute) for s in shapes]

    u = fem.solve_state(f, params)
    derivs = fem.extract_derivatives(u, margin)

    def one(k):
        return eval_td2(derivs, pols[k], params)

    n = max(1, int(threads))
    if n == 1:
        maps = [one(k) for k in range(len(shapes))]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            maps = list(pool.map(one, range(len(shapes))))

    rows = []
    for s, m in zip(shapes, maps):
        rows.append((m.min_value, s.id, s.angles, m.argmin, m.argmin_xy))
    rows.sort(key=lambda r: (r[0], r[1]))
    return [RankingEntry(k + 1, v, sid, tuple(a), ij, xy)
            for k, (v, sid, a, ij, xy) in enumerate(rows)]


def label_positions(entries, grid, labels=None, edge_labels=None, radius=3.0):
    """Attach the nearest scene label within ``radius`` pixels to each entry.

    Labels are given in normalised scene coordinates. A vertex label within
    the radius beats any edge; otherwise the closest edge (point-to-segment
    distance) within the radius is used, and ``NO_LABEL`` if there is none.
    """
    labels = labels or {}
    edge_labels = edge_labels or {}
    h = grid.h
    vnames = sorted(labels)
    vpts = to_physical(grid, [labels[k] for k in vnames]) if vnames else np.zeros((0, 2))
    enames = sorted(edge_labels)
    out = []
    for e in entries:
        p = np.asarray(e.xy, dtype=float)
        best = None
        if vnames:
            d = np.hypot(*(vpts - p).T) / h
            k = int(np.argmin(d))
            if d[k] <= radius + 1e-9:
                best = (vnames[k], float(d[k]))
        if best is None and enames:
            dist = []
            for name in enames:
                a, b = to_physical(grid, edge_labels[name])
                dist.append(float(pg.point_segment_distance(p[None, :], a, b)[0]) / h)
            k = int(np.argmin(dist))
            if dist[k] <= radius + 1e-9:
                best = (enames[k], dist[k])
        if best is None:
            out.append(replace(e, label=NO_LABEL, label_distance=float("nan")))
        else:
            out.append(replace(e, label=best[0], label_distance=best[1]))
    return out
