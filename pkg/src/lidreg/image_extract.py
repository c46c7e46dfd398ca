"""Candidate building segments from an orthorectified optical image.

The image is converted to CIELAB, segmented with mean shift, and the
resulting regions are filtered by metric area and by how densely they fill
their minimum-area bounding rectangle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

from .errors import EmptySegment
from .geometry import convex_hull, min_area_rect
from .raster import OpticalImage

# D65 reference white and the sRGB -> XYZ linear map.
_WHITE = np.array([0.95047, 1.0, 1.08883])
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)


@dataclass(frozen=True)
class SegmentationConfig:
    spatial_bandwidth: float = 8.0  # px
    range_bandwidth: float = 8.0  # Lab units
    min_region: int = 50  # px; smaller basins merge into a neighbor
    min_area: float = 20.0  # m^2
    max_area: float = 2000.0  # m^2
    min_filling: float = 50.0  # percent of the minimum-area rectangle

    def validate(self) -> None:
        if self.spatial_bandwidth <= 0 or self.range_bandwidth <= 0:
            raise ValueError("bandwidths must be positive")
        if self.min_region < 1:
            raise ValueError("min_region must be >= 1")
        if not 0 <= self.min_filling <= 100:
            raise ValueError("min_filling is a percentage")
        if self.min_area > self.max_area:
            raise ValueError("min_area exceeds max_area")


@dataclass
class CandidateSegment:
    ident: int
    pixel_count: int
    centroid_px: np.ndarray  # (2,) x = column, y = row
    area: float  # m^2
    direction: float  # [0, pi), map-frame orientation of the MBR major axis
    filling: float  # percent
    rows: np.ndarray
    cols: np.ndarray


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """sRGB bytes (..., 3) to CIELAB floats, D65 white point."""
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    linear = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T / _WHITE
    delta = 6.0 / 29.0
    f = np.where(xyz > delta**3, np.cbrt(xyz), xyz / (3 * delta**2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def _encode_lab_bytes(lab: np.ndarray) -> np.ndarray:
    """Pack Lab into the 8-bit layout mean shift filtering operates on."""
    enc = np.empty(lab.shape, dtype=np.uint8)
    enc[..., 0] = np.clip(np.rint(lab[..., 0] * 2.55), 0, 255)
    enc[..., 1] = np.clip(np.rint(lab[..., 1] + 128.0), 0, 255)
    enc[..., 2] = np.clip(np.rint(lab[..., 2] + 128.0), 0, 255)
    return enc


def _decode_lab_bytes(enc: np.ndarray) -> np.ndarray:
    lab = np.empty(enc.shape, dtype=np.float64)
    lab[..., 0] = enc[..., 0] / 2.55
    lab[..., 1] = enc[..., 1].astype(np.float64) - 128.0
    lab[..., 2] = enc[..., 2].astype(np.float64) - 128.0
    return lab


def _label_by_similarity(lab: np.ndarray, tol: float) -> np.ndarray:
    """4-connected components over pixels whose Lab distance is <= tol."""
    n_rows, n_cols, _ = lab.shape
    npx = n_rows * n_cols
    idx = np.arange(npx).reshape(n_rows, n_cols)
    flat = lab.reshape(npx, 3)

    right_a = idx[:, :-1].ravel()
    right_b = idx[:, 1:].ravel()
    down_a = idx[:-1, :].ravel()
    down_b = idx[1:, :].ravel()
    src = np.concatenate([right_a, down_a])
    dst = np.concatenate([right_b, down_b])
    dist = np.linalg.norm(flat[src] - flat[dst], axis=1)
    keep = dist <= tol
    graph = scipy.sparse.coo_matrix(
        (np.ones(int(keep.sum())), (src[keep], dst[keep])), shape=(npx, npx)
    )
    _, comp = scipy.sparse.csgraph.connected_components(graph, directed=False)
    return comp.reshape(n_rows, n_cols)


def _merge_small_regions(labels: np.ndarray, lab: np.ndarray, min_region: int) -> np.ndarray:
    """Fold every region smaller than min_region into its most similar neighbor."""
    labels = labels.copy()
    flat_lab = lab.reshape(-1, 3)
    for _ in range(64):  # each pass strictly shrinks the small-region count
        flat = labels.ravel()
        n = int(flat.max()) + 1
        sizes = np.bincount(flat, minlength=n)
        small = np.flatnonzero((sizes > 0) & (sizes < min_region))
        if small.size == 0:
            break
        sums = np.zeros((n, 3))
        np.add.at(sums, flat, flat_lab)
        means = sums / np.maximum(sizes, 1)[:, None]

        a = np.concatenate([labels[:, :-1].ravel(), labels[:-1, :].ravel()])
        b = np.concatenate([labels[:, 1:].ravel(), labels[1:, :].ravel()])
        differ = a != b
        pairs = np.unique(
            np.sort(np.stack([a[differ], b[differ]], axis=1), axis=1), axis=0
        )
        if pairs.size == 0:
            break  # single region left, nothing to merge into
        mapping = np.arange(n)
        merged_any = False
        for region in small:
            neigh = np.concatenate(
                [pairs[pairs[:, 0] == region, 1], pairs[pairs[:, 1] == region, 0]]
            )
            if neigh.size == 0:
                continue
            # prefer a large host; among hosts, the closest mean color
            big = neigh[~np.isin(neigh, small)]
            pool = big if big.size else neigh
            pool_cost = np.linalg.norm(means[pool] - means[region], axis=1)
            best = pool[np.lexsort((pool, pool_cost))[0]]
            mapping[region] = best
            merged_any = True
        if not merged_any:
            break
        # collapse chains (a -> b -> c) before applying
        for _ in range(32):
            nxt = mapping[mapping]
            if np.array_equal(nxt, mapping):
                break
            mapping = nxt
        labels = mapping[labels]
    return _relabel_scan_order(labels)


def _relabel_scan_order(labels: np.ndarray) -> np.ndarray:
    flat = labels.ravel()
    _, first = np.unique(flat, return_index=True)
    order = np.argsort(first)
    remap = np.empty(int(flat.max()) + 1, dtype=np.int32)
    uniq = np.unique(flat)
    remap[uniq[order]] = np.arange(uniq.size, dtype=np.int32)
    return remap[labels].astype(np.int32)


def mean_shift_segment(
    lab: np.ndarray,
    spatial_bandwidth: float = 8.0,
    range_bandwidth: float = 8.0,
    min_region: int = 50,
) -> np.ndarray:
    """Mean-shift segmentation of a Lab image; returns int32 labels, 0-based.

    Filtering runs on the 8-bit Lab encoding (the color window is scaled to
    the L channel's 2.55 packing factor); converged colors are then grouped
    by 4-connectivity with a tolerance of a quarter bandwidth, and basins
    below ``min_region`` pixels are folded into their most similar neighbor.
    """
    enc = _encode_lab_bytes(np.asarray(lab, dtype=np.float64))
    filtered = cv2.pyrMeanShiftFiltering(
        enc,
        sp=float(spatial_bandwidth),
        sr=float(range_bandwidth) * 2.55,
        maxLevel=0,
        termcrit=(cv2.TERM_CRITERIA_MAX_ITER | cv2.TERM_CRITERIA_EPS, 10, 0.5),
    )
    smooth = _decode_lab_bytes(filtered)
    tol = max(2.0, 0.25 * range_bandwidth)
    labels = _label_by_similarity(smooth, tol)
    return _merge_small_regions(labels, smooth, min_region)


def mbr_filling(rows: np.ndarray, cols: np.ndarray):
    """Percent of the minimum-area rectangle covered by the pixel set.

    Pixels are unit squares around integer centers, so the rectangle is
    fitted to the corner points (center +/- 0.5).  A filled axis-aligned or
    rotated rectangle of pixels scores 100; nothing can score more.
    Returns ``(filling_percent, direction, rect_area_px)``.
    """
    centers = np.stack([cols, rows], axis=1).astype(np.float64)
    if centers.shape[0] == 0:
        raise EmptySegment("no pixels")
    try:
        base = convex_hull(centers)
    except EmptySegment:
        base = centers
    offsets = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])
    corners = (base[:, None, :] + offsets[None, :, :]).reshape(-1, 2)
    direction, width, height, rect_area = min_area_rect(corners)
    filling = 100.0 * centers.shape[0] / rect_area
    return min(filling, 100.0), direction, rect_area


def segment_candidates(labels: np.ndarray, gsd: float):
    """Describe every label as a CandidateSegment (geometry in map units)."""
    flat = labels.ravel()
    n_cols = labels.shape[1]
    order = np.argsort(flat, kind="stable")
    sorted_labels = flat[order]
    boundaries = np.flatnonzero(np.diff(sorted_labels)) + 1
    groups = np.split(order, boundaries)
    segments = []
    for ident, group in enumerate(groups):
        rows = (group // n_cols).astype(np.int32)
        cols = (group % n_cols).astype(np.int32)
        segments.append(
            CandidateSegment(
                ident=ident,
                pixel_count=int(group.size),
                centroid_px=np.array([cols.mean(), rows.mean()]),
                area=float(group.size) * gsd * gsd,
                direction=float("nan"),
                filling=float("nan"),
                rows=rows,
                cols=cols,
            )
        )
    return segments


def refine_segments(segments, config: SegmentationConfig):
    """Area filter, then rectangle-filling filter; fills in the geometry."""
    kept = []
    for seg in segments:
        if not (config.min_area <= seg.area <= config.max_area):
            continue
        filling, direction, _ = mbr_filling(seg.rows, seg.cols)
        seg.filling = filling
        # mbr_filling works in row/col space where the row axis points down;
        # mirror the angle so it is comparable with map-frame directions
        seg.direction = (math.pi - direction) % math.pi
        if filling >= config.min_filling:
            kept.append(seg)
    return kept


def extract_image_segments(image: OpticalImage, config: SegmentationConfig | None = None):
    """Full chain: Lab, mean shift, describe, filter.

    Returns ``(kept_segments, labels)``.
    """
    config = config or SegmentationConfig()
    config.validate()
    lab = rgb_to_lab(image.rgb)
    labels = mean_shift_segment(
        lab,
        spatial_bandwidth=config.spatial_bandwidth,
        range_bandwidth=config.range_bandwidth,
        min_region=config.min_region,
    )
    candidates = segment_candidates(labels, image.gsd)
    return refine_segments(candidates, config), labels
