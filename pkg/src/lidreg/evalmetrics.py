"""Registration quality metrics: check points and check pair lines.

Check points compare projected cloud positions against their true pixel
positions.  Check pair lines compare projected roof edges against the
corresponding image edges, with a line-based mean distance and a
segment-space Hausdorff distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySet
from .geometry import point_line_distance, point_segment_distance


@dataclass(frozen=True)
class SegmentPair:
    """A projected edge and its reference edge, both as 2x2 endpoint arrays."""

    projected: np.ndarray
    reference: np.ndarray


def centroid_discrepancy(predicted: np.ndarray, reference: np.ndarray, scale: float = 1.0):
    """Mean and population standard deviation of point distances.

    ``scale`` converts pixel distances to metric ones (pass the ground
    sampling distance to report meters).
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if predicted.shape != reference.shape or predicted.ndim != 2:
        raise ValueError("point arrays must share an (n, 2) shape")
    if predicted.shape[0] == 0:
        raise EmptySet("need at least one point pair")
    d = np.linalg.norm(predicted - reference, axis=1) * scale
    return float(d.mean()), float(d.std(ddof=0))


def discrepancy_gain(before: float, after: float) -> float:
    """Relative improvement in percent: positive when `after` is smaller."""
    if before == 0:
        raise ValueError("cannot compute gain from a zero baseline")
    return (before - after) / before * 100.0


def mean_endpoint_line_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Mean distance of each segment's endpoints to the other's carrier line.

    The four endpoint-to-line distances are averaged.  Because the carrier
    lines are unbounded, two collinear but disjoint segments score exactly
    zero -- the metric measures angular/lateral misalignment only, not
    overlap.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    d = (
        point_line_distance(p[0], q[0], q[1])
        + point_line_distance(p[1], q[0], q[1])
        + point_line_distance(q[0], p[0], p[1])
        + point_line_distance(q[1], p[0], p[1])
    )
    return float(d) / 4.0


def hausdorff_segment_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two segments.

    The farthest point of a segment from a convex set is one of its
    endpoints, so the supremum reduces to four endpoint-to-segment
    distances.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return float(
        max(
            point_segment_distance(p[0], q[0], q[1]),
            point_segment_distance(p[1], q[0], q[1]),
            point_segment_distance(q[0], p[0], p[1]),
            point_segment_distance(q[1], p[0], p[1]),
        )
    )


def pair_line_report(pairs, scale: float = 1.0):
    """Per-pair line and Hausdorff distances plus their summary statistics.

    Returns ``(rows, summary)`` where each row is
    ``(index, line_distance, hausdorff_distance)`` in scaled units and the
    summary maps metric names to (mean, population std).
    """
    rows = []
    for index, pair in enumerate(pairs):
        line_d = mean_endpoint_line_distance(pair.projected, pair.reference) * scale
        haus_d = hausdorff_segment_distance(pair.projected, pair.reference) * scale
        rows.append((index, line_d, haus_d))
    if not rows:
        raise EmptySet("need at least one segment pair")
    line_vals = np.array([r[1] for r in rows])
    haus_vals = np.array([r[2] for r in rows])
    summary = {
        "line": (float(line_vals.mean()), float(line_vals.std(ddof=0))),
        "hausdorff": (float(haus_vals.mean()), float(haus_vals.std(ddof=0))),
    }
    return rows, summary


def normalize_to_bytes(values: np.ndarray) -> np.ndarray:
    """Scale a float raster into display bytes; a constant raster maps to 0."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.uint8)
    return np.clip(np.rint((values - lo) / (hi - lo) * 255.0), 0, 255).astype(np.uint8)


def checkerboard_overlay(luma: np.ndarray, raster: np.ndarray, tile: int = 64) -> np.ndarray:
    """Alternate square tiles of the optical luma and a rendered raster.

    Both inputs must share a shape; the result is a single-channel byte
    image where even tiles show the image and odd tiles the raster, which
    makes residual misalignment visible as broken edges on tile borders.
    """
    luma = np.asarray(luma)
    if luma.shape != raster.shape:
        raise ValueError("overlay inputs must share a shape")
    if tile < 1:
        raise ValueError("tile must be >= 1")
    a = np.clip(np.rint(np.asarray(luma, dtype=np.float64)), 0, 255).astype(np.uint8)
    b = normalize_to_bytes(raster)
    rows = np.arange(luma.shape[0]) // tile
    cols = np.arange(luma.shape[1]) // tile
    use_raster = ((rows[:, None] + cols[None, :]) % 2).astype(bool)
    return np.where(use_raster, b, a)
