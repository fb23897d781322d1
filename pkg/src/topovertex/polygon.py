"""Small polygon toolbox: shoelace moments, point-in-polygon, simplicity.

Polygons are ``(n, 2)`` float arrays of vertices without the closing
repetition of the first vertex.
"""

import numpy as np

from .errors import GeometryError

EDGE_TOL = 1e-9


def as_polygon(vertices):
    poly = np.asarray(vertices, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
        raise GeometryError(f"polygon needs at least 3 vertices in 2D, got shape {poly.shape}")
    return poly


def signed_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def moments(poly):
    """Return ``(area, centroid)`` of a counterclockwise simple polygon.

    Both are exact for the polygon (shoelace formula and its first-moment
    analogue).
    """
    poly = as_polygon(poly)
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * float(np.sum(cross))
    if not area > 0.0:
        raise GeometryError(f"polygon area {area:g} is not positive (clockwise or degenerate)")
    cx = float(np.sum((x + xn) * cross)) / (6.0 * area)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * area)
    return area, np.array([cx, cy])


def _on_boundary(px, py, poly, tol):
    on = np.zeros(px.shape, dtype=bool)
    n = len(poly)
    for k in range(n):
        ax, ay = poly[k]
        bx, by = poly[(k + 1) % n]
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        t = np.clip(((px - ax) * dx + (py - ay) * dy) / seg2, 0.0, 1.0)
        qx, qy = ax + t * dx - px, ay + t * dy - py
        on |= qx * qx + qy * qy <= tol * tol
    return on


def contains(poly, points, include_boundary=True, tol=EDGE_TOL):
    """Vectorised crossing-number test.

    ``points`` has shape ``(..., 2)``; returns a boolean array of shape
    ``(...)``. Points within ``tol`` of an edge count as inside when
    ``include_boundary`` is set and as outside otherwise.
    """
    poly = as_polygon(poly)
    pts = np.asarray(points, dtype=float)
    px, py = pts[..., 0], pts[..., 1]
    inside = np.zeros(px.shape, dtype=bool)
    n = len(poly)
    for k in range(n):
        ax, ay = poly[k]
        bx, by = poly[(k + 1) % n]
        if ay == by:
            continue
        crosses = (ay > py) != (by > py)
        xint = ax + (py - ay) * (bx - ax) / (by - ay)
        inside ^= crosses & (px < xint)
    on = _on_boundary(px, py, poly, tol)
    if include_boundary:
        return inside | on
    return inside & ~on


def _segments_intersect(p1, p2, q1, q2, eps=1e-14):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and \
            ((d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)):
        return True

    def on_seg(a, b, c):
        return (min(a[0], b[0]) - eps <= c[0] <= max(a[0], b[0]) + eps
                and min(a[1], b[1]) - eps <= c[1] <= max(a[1], b[1]) + eps)

    if abs(d1) <= eps and on_seg(q1, q2, p1):
        return True
    if abs(d2) <= eps and on_seg(q1, q2, p2):
        return True
    if abs(d3) <= eps and on_seg(p1, p2, q1):
        return True
    if abs(d4) <= eps and on_seg(p1, p2, q2):
        return True
    return False


def is_simple(poly):
    """True when no two non-adjacent edges touch (O(n^2), n is small here)."""
    poly = as_polygon(poly)
    n = len(poly)
    for i in range(n):
        a1, a2 = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(a1, a2, poly[j], poly[(j + 1) % n]):
                return False
    return True


def point_segment_distance(points, a, b):
    pts = np.asarray(points, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    t = np.clip(((pts - a) @ d) / float(d @ d), 0.0, 1.0)
    proj = a + t[..., None] * d
    return np.linalg.norm(pts - proj, axis=-1)
