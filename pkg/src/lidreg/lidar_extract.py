"""Building-region extraction from a classified LiDAR point cloud.

Pipeline: split at an elevation threshold derived from the ground points,
rasterize the elevated points onto a metric grid, clean the occupancy mask
with a morphological opening, label 8-connected components, drop the small
ones, and describe each surviving region by its member points.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
import scipy.ndimage

from .errors import EmptyCloud, EmptySegment, InputError, NoGroundPoints
from .geometry import convex_hull, min_area_rect, polygon_area
from .pointcloud import CLASS_GROUND, PointCloud
from .raster import RasterImage


@dataclass(frozen=True)
class ExtractionConfig:
    relief_factor: float = 2.5  # m above mean ground level
    grid_resolution: float = 1.5  # m per raster cell
    min_segment_area: float = 10.0  # m^2, smaller components are erased
    opening_radius: int = 1  # square structuring element of side 2r+1

    def validate(self) -> None:
        if self.grid_resolution <= 0:
            raise ValueError("grid_resolution must be positive")
        if self.opening_radius < 0:
            raise ValueError("opening_radius must be >= 0")
        if self.min_segment_area < 0:
            raise ValueError("min_segment_area must be >= 0")


@dataclass
class BuildingRegion:
    ident: int
    centroid: np.ndarray  # (2,) mean of member points, m
    mean_z: float
    area: float  # convex hull area, m^2
    direction: float  # minimum-area rectangle major axis, [0, pi)
    boundary: np.ndarray  # (h, 2) convex hull, counterclockwise
    point_index: np.ndarray  # indices into the elevated cloud

    @property
    def centroid3(self) -> np.ndarray:
        return np.array([self.centroid[0], self.centroid[1], self.mean_z])


def split_ground(cloud: PointCloud, relief_factor: float = 2.5):
    """Split the cloud at T_e = mean ground elevation + relief_factor.

    Returns ``(low, elevated, threshold)``; points with z strictly above the
    threshold count as elevated.
    """
    if len(cloud) == 0:
        raise EmptyCloud("cannot split an empty cloud")
    ground_mask = cloud.classes == CLASS_GROUND
    if not np.any(ground_mask):
        raise NoGroundPoints("no ground-classified points in cloud")
    threshold = float(cloud.z[ground_mask].mean()) + relief_factor
    elevated_mask = cloud.z > threshold
    return cloud.subset(~elevated_mask), cloud.subset(elevated_mask), threshold


def rasterize_elevated(cloud: PointCloud, resolution: float = 1.0):
    """Grid the elevated points; returns (occupancy, max_z) RasterImages.

    The grid is anchored at the point bounds' min corner; each occupied cell
    stores the maximum z of the points it contains.
    """
    if len(cloud) == 0:
        raise EmptyCloud("no elevated points to rasterize")
    origin = (float(cloud.x.min()), float(cloud.y.min()))
    cols = np.floor((cloud.x - origin[0]) / resolution).astype(int)
    rows = np.floor((cloud.y - origin[1]) / resolution).astype(int)
    n_rows = int(rows.max()) + 1
    n_cols = int(cols.max()) + 1
    occupancy = np.zeros((n_rows, n_cols), dtype=bool)
    occupancy[rows, cols] = True
    max_z = np.full((n_rows, n_cols), -np.inf)
    np.maximum.at(max_z, (rows, cols), cloud.z)
    max_z[~occupancy] = 0.0
    return (
        RasterImage(occupancy, origin, resolution),
        RasterImage(max_z, origin, resolution),
    )


def morphological_open(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """Binary opening with a square structuring element of side 2*radius+1.

    Cells beyond the raster border count as empty for the erosion and the
    dilation alike.
    """
    mask = np.asarray(mask, dtype=bool)
    if radius == 0:
        return mask.copy()
    structure = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    eroded = scipy.ndimage.binary_erosion(mask, structure=structure, border_value=0)
    return scipy.ndimage.binary_dilation(eroded, structure=structure, border_value=0)


def label_components(mask: np.ndarray, resolution: float, min_area: float):
    """8-connected labeling with small components erased.

    Components covering strictly less than ``min_area`` square meters are
    removed; survivors are relabeled 1..n in scan order.  Returns
    ``(labels, n)``.
    """
    structure = np.ones((3, 3), dtype=bool)
    raw, n_raw = scipy.ndimage.label(np.asarray(mask, dtype=bool), structure=structure)
    if n_raw == 0:
        return raw, 0
    cell_area = resolution * resolution
    counts = np.bincount(raw.ravel(), minlength=n_raw + 1)
    keep = np.flatnonzero(counts * cell_area >= min_area)
    keep = keep[keep > 0]
    remap = np.zeros(n_raw + 1, dtype=raw.dtype)
    remap[keep] = np.arange(1, keep.size + 1)
    return remap[raw], int(keep.size)


def extract_building_regions(cloud: PointCloud, config: ExtractionConfig | None = None):
    """Full extraction chain; returns a list of BuildingRegion.

    Regions whose member points are degenerate (fewer than three distinct
    points, or collinear) are silently dropped -- they cannot carry a hull.
    """
    config = config or ExtractionConfig()
    config.validate()
    _, elevated, _ = split_ground(cloud, config.relief_factor)
    if len(elevated) == 0:
        return []
    occupancy, _ = rasterize_elevated(elevated, config.grid_resolution)
    opened = morphological_open(occupancy.values, config.opening_radius)
    labels, n_regions = label_components(
        opened, config.grid_resolution, config.min_segment_area
    )
    if n_regions == 0:
        return []
    rows, cols = occupancy.cell_of(elevated.x, elevated.y)
    point_labels = labels[rows, cols]
    regions: list[BuildingRegion] = []
    ident = 0
    for lab in range(1, n_regions + 1):
        idx = np.flatnonzero(point_labels == lab)
        if idx.size < 3:
            continue
        xy = elevated.xyz[idx, :2]
        try:
            hull = convex_hull(xy)
            direction, _, _, _ = min_area_rect(xy)
        except EmptySegment:
            continue  # degenerate blob, not a usable region
        area = polygon_area(hull)
        if area <= 0:
            continue
        regions.append(
            BuildingRegion(
                ident=ident,
                centroid=xy.mean(axis=0),
                mean_z=float(elevated.z[idx].mean()),
                area=float(area),
                direction=float(direction),
                boundary=hull,
                point_index=idx,
            )
        )
        ident += 1
    return regions


# --- WKT-style region serialization --------------------------------------

def write_regions(path, regions) -> None:
    with open(path, "w", encoding="ascii") as handle:
        handle.write("# id POLYGON((x y, ...)) centroid_x centroid_y mean_z area direction\n")
        for region in regions:
            ring = ", ".join(f"{float(x)!r} {float(y)!r}" for x, y in region.boundary)
            handle.write(
                f"{region.ident} POLYGON(({ring})) "
                f"{float(region.centroid[0])!r} {float(region.centroid[1])!r} "
                f"{float(region.mean_z)!r} {float(region.area)!r} "
                f"{float(region.direction)!r}\n"
            )


_REGION_RE = re.compile(
    r"^(\d+)\s+POLYGON\(\((.*)\)\)\s+(\S+)\s+(\S+)\s+(\S+)\s+(\S+)\s+(\S+)\s*$"
)


def read_regions(path):
    regions = []
    with open(path, "r", encoding="ascii") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            match = _REGION_RE.match(line)
            if match is None:
                raise InputError(f"{path}: line {lineno}: not a region record")
            ident = int(match.group(1))
            try:
                ring = np.array(
                    [[float(t) for t in pair.split()] for pair in match.group(2).split(",")]
                )
            except ValueError as exc:
                raise InputError(f"{path}: line {lineno}: bad ring: {exc}") from exc
            cx, cy, mean_z, area, direction = (float(match.group(i)) for i in range(3, 8))
            regions.append(
                BuildingRegion(
                    ident=ident,
                    centroid=np.array([cx, cy]),
                    mean_z=mean_z,
                    area=area,
                    direction=direction,
                    boundary=ring,
                    point_index=np.empty(0, dtype=int),
                )
            )
    return regions
