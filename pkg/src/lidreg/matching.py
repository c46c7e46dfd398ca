"""Pairing LiDAR building regions with optical image segments.

Regions are matched by centroid proximity in pixel space (after an optional
translation guide from the dominant region on each side), then cleaned with
a graph-transformation filter and validated by area and orientation
consistency.  A RANSAC similarity filter is available as an alternative to
the graph filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.spatial

from .errors import AmbiguousLargest, EmptySet, InputError, TooFewMatches
from .geometry import direction_difference
from .raster import OpticalImage


@dataclass(frozen=True)
class MatchConfig:
    gtm_k: int = 4
    dominance_ratio: float = 1.2
    area_tolerance: float = 0.15  # relative to the larger area
    direction_tolerance: float = math.radians(2.0)
    ransac_threshold: float = 3.0  # px
    ransac_iterations: int = 500


@dataclass(frozen=True)
class Correspondence:
    lidar_id: int
    image_id: int
    lidar_xy: np.ndarray  # (2,) region centroid, m (z = 0 plane)
    lidar_px: np.ndarray  # (2,) the same centroid mapped into the image grid
    image_px: np.ndarray  # (2,) segment centroid, px
    inlier: bool = True


def largest_segment_translation(regions, segments, image: OpticalImage,
                                dominance_ratio: float = 1.2) -> np.ndarray:
    """Pixel offset aligning the dominant region with the dominant segment.

    Each side must have a clear largest element (at least ``dominance_ratio``
    times the runner-up by area); otherwise the guide is refused.
    """
    if not regions or not segments:
        raise EmptySet("need at least one region and one segment")
    for label, areas in (
        ("LiDAR", [r.area for r in regions]),
        ("image", [s.area for s in segments]),
    ):
        ranked = sorted(areas, reverse=True)
        if len(ranked) > 1 and ranked[0] < dominance_ratio * ranked[1]:
            raise AmbiguousLargest(
                f"no dominant {label} element: {ranked[0]:.1f} vs {ranked[1]:.1f} m^2"
            )
    big_region = max(regions, key=lambda r: r.area)
    big_segment = max(segments, key=lambda s: s.area)
    projected = image.world_to_pixel(big_region.centroid)
    return big_segment.centroid_px - projected


def initial_match(regions, segments, image: OpticalImage, translation=None):
    """Mutual-nearest-neighbor pairing of centroids in pixel space."""
    if not regions or not segments:
        raise EmptySet("need at least one region and one segment")
    shift = np.zeros(2) if translation is None else np.asarray(translation, dtype=float)
    lidar_px = image.world_to_pixel(np.array([r.centroid for r in regions]))
    image_px = np.array([s.centroid_px for s in segments])
    dists = scipy.spatial.distance.cdist(lidar_px + shift, image_px)
    best_seg = dists.argmin(axis=1)
    best_reg = dists.argmin(axis=0)
    matches = []
    for i, region in enumerate(regions):
        j = int(best_seg[i])
        if int(best_reg[j]) != i:
            continue
        matches.append(
            Correspondence(
                lidar_id=region.ident,
                image_id=segments[j].ident,
                lidar_xy=np.asarray(region.centroid, dtype=float),
                lidar_px=lidar_px[i],
                image_px=image_px[j],
            )
        )
    return matches


def _knn_adjacency(points: np.ndarray, k: int) -> np.ndarray:
    """Directed k-nearest-neighbor graph, edges no longer than the median
    pairwise distance."""
    n = points.shape[0]
    d = scipy.spatial.distance.cdist(points, points)
    off_diagonal = d[~np.eye(n, dtype=bool)]
    median = np.median(off_diagonal)
    adjacency = np.zeros((n, n), dtype=bool)
    for i in range(n):
        order = np.argsort(d[i], kind="stable")
        order = order[order != i]
        chosen = [j for j in order[: k] if d[i, j] < median]
        adjacency[i, chosen] = True
    return adjacency


def gtm_filter(matches, k: int = 4):
    """Graph-transformation outlier removal.

    Builds median-limited k-NN graphs over both centroid sets and removes,
    one at a time, the match whose adjacency rows disagree the most, until
    the two graphs coincide.  Ties are broken toward the larger residual
    after mean-offset alignment, then toward the lower index.
    """
    if len(matches) < k + 1:
        raise TooFewMatches(f"graph filter needs at least {k + 1} matches, got {len(matches)}")
    keep = list(range(len(matches)))
    pts_a_all = np.array([m.lidar_px for m in matches])
    pts_b_all = np.array([m.image_px for m in matches])
    while len(keep) >= 2:
        pts_a = pts_a_all[keep]
        pts_b = pts_b_all[keep]
        k_eff = min(k, len(keep) - 1)
        adj_a = _knn_adjacency(pts_a, k_eff)
        adj_b = _knn_adjacency(pts_b, k_eff)
        if np.array_equal(adj_a, adj_b):
            break
        disagreement = np.sum(adj_a != adj_b, axis=1)
        worst = disagreement.max()
        candidates = np.flatnonzero(disagreement == worst)
        if candidates.size > 1:
            offset = (pts_b - pts_a).mean(axis=0)
            residual = np.linalg.norm(pts_a + offset - pts_b, axis=1)
            ranked = sorted(candidates, key=lambda c: (-residual[c], keep[c]))
            victim = ranked[0]
        else:
            victim = int(candidates[0])
        keep.pop(victim)
    return [matches[i] for i in keep]


def _similarity_from_two(a: np.ndarray, b: np.ndarray):
    """2-D similarity (scale, rotation, translation) from two point pairs."""
    za = a[:, 0] + 1j * a[:, 1]
    zb = b[:, 0] + 1j * b[:, 1]
    denom = za[1] - za[0]
    if abs(denom) < 1e-9:
        return None
    m = (zb[1] - zb[0]) / denom
    t = zb[0] - m * za[0]
    return m, t


def ransac_filter(matches, threshold: float = 3.0, iterations: int = 500, seed: int = 0):
    """Similarity-model consensus filter over the matched centroids."""
    n = len(matches)
    if n < 3:
        raise TooFewMatches(f"RANSAC needs at least 3 matches, got {n}")
    pts_a = np.array([m.lidar_px for m in matches])
    pts_b = np.array([m.image_px for m in matches])
    za = pts_a[:, 0] + 1j * pts_a[:, 1]
    zb = pts_b[:, 0] + 1j * pts_b[:, 1]
    rng = np.random.default_rng(seed)
    best_mask = None
    best_count = -1
    for _ in range(iterations):
        pick = rng.choice(n, size=2, replace=False)
        model = _similarity_from_two(pts_a[pick], pts_b[pick])
        if model is None:
            continue
        m, t = model
        err = np.abs(m * za + t - zb)
        mask = err <= threshold
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
    if best_mask is None or best_count < 2:
        raise TooFewMatches("RANSAC found no consistent subset")
    return [match for match, ok in zip(matches, best_mask) if ok]


def validate_pairs(matches, regions_by_id, segments_by_id, config: MatchConfig | None = None):
    """Keep pairs whose areas and orientations agree.

    Area difference is taken relative to the larger of the two areas and
    must not exceed the tolerance; orientation difference is compared modulo
    pi against the angular tolerance.
    """
    config = config or MatchConfig()
    kept = []
    for match in matches:
        region = regions_by_id[match.lidar_id]
        segment = segments_by_id[match.image_id]
        larger = max(region.area, segment.area)
        if larger <= 0:
            continue
        if abs(region.area - segment.area) / larger > config.area_tolerance:
            continue
        if direction_difference(region.direction, segment.direction) > config.direction_tolerance:
            continue
        kept.append(match)
    return kept


def match_regions(regions, segments, image: OpticalImage, config: MatchConfig | None = None,
                  use_guide: bool = True, method: str = "gtm", seed: int = 0):
    """Full matching chain; returns the validated correspondence list."""
    config = config or MatchConfig()
    translation = None
    if use_guide:
        try:
            translation = largest_segment_translation(
                regions, segments, image, config.dominance_ratio
            )
        except AmbiguousLargest:
            translation = None
    matches = initial_match(regions, segments, image, translation)
    if method == "gtm":
        matches = gtm_filter(matches, k=config.gtm_k)
    elif method == "ransac":
        matches = ransac_filter(
            matches, threshold=config.ransac_threshold,
            iterations=config.ransac_iterations, seed=seed,
        )
    elif method != "none":
        raise ValueError(f"unknown filter method {method!r}")
    regions_by_id = {r.ident: r for r in regions}
    segments_by_id = {s.ident: s for s in segments}
    return validate_pairs(matches, regions_by_id, segments_by_id, config)


# --- correspondence file format -------------------------------------------

def write_correspondences(path, matches) -> None:
    with open(path, "w", encoding="ascii") as handle:
        handle.write("# lidar_id image_id lidar_x_m lidar_y_m image_x_px image_y_px inlier\n")
        for m in matches:
            handle.write(
                f"{m.lidar_id} {m.image_id} "
                f"{float(m.lidar_xy[0])!r} {float(m.lidar_xy[1])!r} "
                f"{float(m.image_px[0])!r} {float(m.image_px[1])!r} "
                f"{1 if m.inlier else 0}\n"
            )


def read_correspondences(path):
    matches = []
    with open(path, "r", encoding="ascii") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 7:
                raise InputError(f"{path}: line {lineno}: expected 7 fields, got {len(parts)}")
            try:
                lidar_id, image_id = int(parts[0]), int(parts[1])
                lx, ly, ix, iy = (float(p) for p in parts[2:6])
                inlier = bool(int(parts[6]))
            except ValueError as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from exc
            matches.append(
                Correspondence(
                    lidar_id=lidar_id,
                    image_id=image_id,
                    lidar_xy=np.array([lx, ly]),
                    lidar_px=np.array([np.nan, np.nan]),
                    image_px=np.array([ix, iy]),
                    inlier=inlier,
                )
            )
    return matches


def mark_inliers(matches, kept):
    """Return `matches` with the inlier flag set for members of `kept`."""
    kept_ids = {(m.lidar_id, m.image_id) for m in kept}
    return [replace(m, inlier=(m.lidar_id, m.image_id) in kept_ids) for m in matches]
