"""Small planar geometry kernel used by extraction, matching and evaluation."""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import EmptySegment


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Convex hull vertices in counterclockwise order, shape (h, 2).

    Degenerate inputs (fewer than 3 distinct points, or all collinear) raise
    EmptySegment -- the callers treat such blobs as unusable regions.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("expected (n, 2) points")
    if points.shape[0] < 3:
        raise EmptySegment("hull needs at least 3 points")
    try:
        hull = ConvexHull(points)
    except QhullError as exc:
        raise EmptySegment(f"degenerate point set: {exc}") from exc
    return points[hull.vertices]  # Qhull returns 2-D hull vertices CCW


def polygon_area(vertices: np.ndarray) -> float:
    """Shoelace area; positive for counterclockwise rings."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_centroid(vertices: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon (falls back to vertex mean when the
    area vanishes)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * float(np.sum(cross))
    if abs(area) < 1e-12:
        return v.mean(axis=0)
    cx = float(np.sum((x + xn) * cross)) / (6.0 * area)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * area)
    return np.array([cx, cy])


def min_area_rect(points: np.ndarray):
    """Minimum-area bounding rectangle via rotating calipers.

    Returns ``(direction, width, height, area)`` where ``direction`` is the
    orientation of the rectangle's LONGER side, folded into [0, pi).
    The optimum is attained with one side collinear to a hull edge, so only
    hull-edge orientations are scanned.
    """
    hull = convex_hull(points)
    best = None
    for i in range(hull.shape[0]):
        edge = hull[(i + 1) % hull.shape[0]] - hull[i]
        norm = math.hypot(edge[0], edge[1])
        if norm < 1e-12:
            continue
        ux, uy = edge[0] / norm, edge[1] / norm
        # project hull on the edge direction and its normal
        along = hull[:, 0] * ux + hull[:, 1] * uy
        across = -hull[:, 0] * uy + hull[:, 1] * ux
        w = float(along.max() - along.min())
        h = float(across.max() - across.min())
        area = w * h
        if best is None or area < best[3] - 1e-12:
            if w >= h:
                direction = math.atan2(uy, ux)
            else:
                direction = math.atan2(ux, -uy)  # normal direction
            best = (direction % math.pi, w, h, area)
    if best is None:
        raise EmptySegment("all hull edges degenerate")
    return best


def direction_difference(a: float, b: float) -> float:
    """Angular difference of two undirected orientations, in [0, pi/2]."""
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


def point_segment_distance(point, seg_start, seg_end) -> float:
    """Euclidean distance from a point to a closed 2-D segment."""
    p = np.asarray(point, dtype=float)
    a = np.asarray(seg_start, dtype=float)
    b = np.asarray(seg_end, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-24:
        return float(np.hypot(*(p - a)))
    t = float((p - a) @ ab) / denom
    t = max(0.0, min(1.0, t))
    closest = a + t * ab
    return float(np.hypot(*(p - closest)))


def point_line_distance(point, line_a, line_b) -> float:
    """Distance from a point to the INFINITE line through two points."""
    p = np.asarray(point, dtype=float)
    a = np.asarray(line_a, dtype=float)
    b = np.asarray(line_b, dtype=float)
    ab = b - a
    norm = float(np.hypot(*ab))
    if norm < 1e-12:
        return float(np.hypot(*(p - a)))
    return abs(float(ab[0] * (p[1] - a[1]) - ab[1] * (p[0] - a[0]))) / norm


def points_in_rotated_rect(xy: np.ndarray, center, half_w, half_h, angle) -> np.ndarray:
    """Vectorized inclusion test against a rectangle rotated by ``angle``."""
    xy = np.asarray(xy, dtype=float)
    c, s = math.cos(angle), math.sin(angle)
    dx = xy[..., 0] - center[0]
    dy = xy[..., 1] - center[1]
    u = dx * c + dy * s
    v = -dx * s + dy * c
    return (np.abs(u) <= half_w) & (np.abs(v) <= half_h)


def rect_corners(center, half_w, half_h, angle) -> np.ndarray:
    """Corners of a rotated rectangle, CCW, shape (4, 2)."""
    c, s = math.cos(angle), math.sin(angle)
    local = np.array(
        [[-half_w, -half_h], [half_w, -half_h], [half_w, half_h], [-half_w, half_h]]
    )
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.asarray(center, dtype=float)
