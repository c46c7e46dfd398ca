"""Synthetic urban scenes with exact ground truth.

A scene is a road grid (connected network of dark strips) whose cells hold
one building each; one "anchor" building spans two merged cells so that the
largest building dominates every other candidate segment by a comfortable
margin.  Cells without a building stay grass, optionally planted with small
trees.  The LiDAR cloud samples ground, roofs and canopies at a uniform
density; the optical image is ray-cast from the true camera pose, so
projecting any ground-truth 3-D point with that pose lands exactly on the
rendered feature.

Determinism: one ``numpy.random.default_rng(seed)`` drives every draw in a
fixed order; identical specs produce bit-identical clouds, images and truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import CameraPose, Frame, build_camera_matrix, project_points
from .errors import InvalidSpec, UnknownBuilding
from .geometry import points_in_rotated_rect, rect_corners
from .pointcloud import (
    CLASS_BUILDING,
    CLASS_GROUND,
    CLASS_HIGH_VEG,
    PointCloud,
)
from .raster import OpticalImage

SOURCE_GROUND = -1
SOURCE_TREE = -2


@dataclass(frozen=True)
class Palette:
    """Material colors (sRGB) and LiDAR return intensities."""

    road: tuple[int, int, int] = (57, 57, 62)
    grass: tuple[int, int, int] = (98, 140, 72)
    tree: tuple[int, int, int] = (46, 88, 44)
    roofs: tuple[tuple[int, int, int], ...] = (
        (168, 82, 66),
        (176, 174, 170),
        (104, 102, 116),
        (190, 152, 108),
        (84, 72, 66),
        (206, 200, 188),
        (128, 136, 148),
    )
    road_intensity: float = 24.0
    grass_intensity: float = 176.0
    tree_intensity: float = 152.0
    roof_intensity_range: tuple[float, float] = (56.0, 132.0)


@dataclass(frozen=True)
class SceneSpec:
    """Everything needed to generate a scene deterministically."""

    extent: tuple[float, float] = (225.0, 247.5)  # world meters (east, north)
    n_buildings: int = 28
    footprint_range: tuple[float, float] = (11.0, 19.0)  # building side, m
    height_range: tuple[float, float] = (4.0, 16.0)  # eave height, m
    gable_fraction: float = 0.5
    tree_count: int = 20
    tree_radius: float = 1.2
    density: float = 2.0  # LiDAR points per square meter
    sigma_z: float = 0.0  # LiDAR vertical noise, m
    intensity_noise: float = 0.0
    image_noise: float = 0.0  # per-pixel color noise, 8-bit units
    gsd: float = 0.15  # image ground sample distance, m/px
    flying_height: float = 1000.0
    road_width: float = 6.0
    target_pitch: float = 31.0  # preferred road-grid spacing, m
    palette: Palette = field(default_factory=Palette)
    seed: int = 0

    def validate(self) -> None:
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise InvalidSpec("extent must be positive")
        if self.n_buildings < 0:
            raise InvalidSpec("building count must be >= 0")
        if self.density <= 0:
            raise InvalidSpec("density must be positive")
        if self.gsd <= 0:
            raise InvalidSpec("gsd must be positive")
        if self.footprint_range[0] > self.footprint_range[1]:
            raise InvalidSpec("footprint range reversed")
        if self.footprint_range[0] < 4.0:
            raise InvalidSpec("buildings below 4 m side are not supported")


@dataclass(frozen=True)
class Building:
    ident: int
    center: tuple[float, float]
    half_w: float
    half_h: float
    angle: float  # rad, orientation of the first (w) axis
    style: str  # "flat" | "gable"
    eave_height: float
    rise: float  # ridge height above the eave (0 for flat roofs)
    color: tuple[int, int, int]
    intensity: float

    @property
    def area(self) -> float:
        return 4.0 * self.half_w * self.half_h

    @property
    def corners(self) -> np.ndarray:
        return rect_corners(self.center, self.half_w, self.half_h, self.angle)

    @property
    def mean_roof_z(self) -> float:
        # a gable tent profile averages to half the rise over the footprint
        return self.eave_height + 0.5 * self.rise

    @property
    def centroid3(self) -> np.ndarray:
        return np.array([self.center[0], self.center[1], self.mean_roof_z])

    def roof_z(self, xy: np.ndarray) -> np.ndarray:
        """Roof elevation under each (x, y); caller guarantees points inside."""
        xy = np.asarray(xy, dtype=float)
        if self.style == "flat" or self.rise == 0.0:
            return np.full(xy.shape[:-1], self.eave_height)
        c, s = math.cos(self.angle), math.sin(self.angle)
        dx = xy[..., 0] - self.center[0]
        dy = xy[..., 1] - self.center[1]
        # ridge runs along the LONGER axis; profile varies across the shorter
        if self.half_w >= self.half_h:
            across = (-dx * s + dy * c) / self.half_h
        else:
            across = (dx * c + dy * s) / self.half_w
        return self.eave_height + self.rise * (1.0 - np.abs(np.clip(across, -1, 1)))

    def eave_edges(self) -> np.ndarray:
        """Four 3-D roof boundary segments at eave height, shape (4, 2, 3)."""
        corners = self.corners
        edges = np.empty((4, 2, 3))
        for i in range(4):
            a = corners[i]
            b = corners[(i + 1) % 4]
            edges[i, 0] = (a[0], a[1], self.eave_height)
            edges[i, 1] = (b[0], b[1], self.eave_height)
        return edges


@dataclass(frozen=True)
class Tree:
    center: tuple[float, float]
    radius: float
    height: float


@dataclass
class GroundTruth:
    pose: CameraPose  # the pose the image was actually rendered with
    nominal_pose: CameraPose  # what naive georeferencing assumes
    buildings: list[Building]
    trees: list[Tree]
    point_source: np.ndarray  # per point: building id, -1 ground, -2 tree
    spec: SceneSpec

    def checkpoints(self) -> np.ndarray:
        """(n, 3) roof centroids (the check points of the scene)."""
        if not self.buildings:
            return np.empty((0, 3))
        return np.stack([b.centroid3 for b in self.buildings])

    def boundary_segments(self) -> np.ndarray:
        """(n, 2, 3) roof eave edges (the check pair lines of the scene)."""
        if not self.buildings:
            return np.empty((0, 2, 3))
        return np.concatenate([b.eave_edges() for b in self.buildings])


def nominal_pose(extent, gsd: float, flying_height: float) -> CameraPose:
    """Nadir camera over the scene center matching the orthographic
    georeferencing of the rendered frame (omega = pi, north-up)."""
    n_cols = int(round(extent[0] / gsd))
    n_rows = int(round(extent[1] / gsd))
    return CameraPose(
        alpha_x=flying_height / gsd,
        alpha_y=flying_height / gsd,
        skew=0.0,
        p_x=(n_cols - 1) / 2.0,
        p_y=(n_rows - 1) / 2.0,
        x0=extent[0] / 2.0,
        y0=extent[1] / 2.0,
        z0=flying_height,
        omega=math.pi,
        phi=0.0,
        kappa=0.0,
    )


def perturb_pose(pose: CameraPose, translation: float, rotation: float, seed: int) -> CameraPose:
    """Offset the external parameters by vectors of exact requested norms.

    ``translation`` is the norm of the projection-center offset (m);
    ``rotation`` the norm of the (omega, phi, kappa) offset (rad).  Zero
    magnitudes return the pose unchanged.
    """
    rng = np.random.default_rng(seed)

    def _unit(dim: int) -> np.ndarray:
        while True:
            v = rng.normal(size=dim)
            n = np.linalg.norm(v)
            if n > 1e-9:
                return v / n

    d_center = _unit(3) * translation if translation != 0.0 else np.zeros(3)
    d_angles = _unit(3) * rotation if rotation != 0.0 else np.zeros(3)
    ext = pose.externals
    ext[:3] += d_center
    ext[3:] += d_angles
    return pose.with_externals(ext)


# --------------------------------------------------------------------------
# layout

def _layout(spec: SceneSpec, rng: np.random.Generator):
    """Place the road grid and the building footprints."""
    w_m, h_m = spec.extent
    n_cx = max(2, int(round(w_m / spec.target_pitch)))
    n_cy = max(1, int(round(h_m / spec.target_pitch)))
    pitch_x = w_m / n_cx
    pitch_y = h_m / n_cy
    margin = 1.0
    usable_x = pitch_x - spec.road_width - 2 * margin
    usable_y = pitch_y - spec.road_width - 2 * margin
    if usable_x < spec.footprint_range[0] * 0.6 or usable_y < spec.footprint_range[0] * 0.6:
        raise InvalidSpec("cells too small for the requested footprints; "
                          "increase extent or target_pitch")

    cells = [(r, c) for r in range(n_cy) for c in range(n_cx)]
    center_rc = ((n_cy - 1) / 2.0, (n_cx - 1) / 2.0)
    cells.sort(key=lambda rc: ((rc[0] - center_rc[0]) ** 2 + (rc[1] - center_rc[1]) ** 2,
                               rc[0], rc[1]))

    buildings: list[Building] = []
    used = set()

    def _cell_center(r, c):
        return ((c + 0.5) * pitch_x, (r + 0.5) * pitch_y)

    if spec.n_buildings > 0:
        # anchor spans two horizontally adjacent cells near the center
        anchor_rc = None
        for (r, c) in cells:
            if c + 1 < n_cx and (r, c + 1) not in used:
                anchor_rc = (r, c)
                break
        if anchor_rc is None:
            raise InvalidSpec("grid too small for the anchor building")
        used.add(anchor_rc)
        used.add((anchor_rc[0], anchor_rc[1] + 1))
        block_w = 2 * pitch_x - spec.road_width - 2 * margin
        block_h = usable_y
        angle = rng.uniform(math.radians(3), math.radians(6)) * (1 if rng.random() < 0.5 else -1)
        bw = block_w * 0.93
        bh = block_h * 0.93
        # shrink so the rotated rectangle still fits its block
        ca, sa = abs(math.cos(angle)), abs(math.sin(angle))
        scale = min(1.0, block_w / (bw * ca + bh * sa), block_h / (bw * sa + bh * ca))
        bw *= scale
        bh *= scale
        cx = (anchor_rc[1] + 1.0) * pitch_x
        cy = (anchor_rc[0] + 0.5) * pitch_y
        eave = float(rng.uniform(*spec.height_range))
        style = "gable" if rng.random() < spec.gable_fraction else "flat"
        rise = float(rng.uniform(0.25, 0.45) * min(bw, bh) / 2) if style == "gable" else 0.0
        roof_idx = int(rng.integers(len(spec.palette.roofs)))
        buildings.append(Building(
            ident=0, center=(cx, cy), half_w=bw / 2, half_h=bh / 2, angle=angle,
            style=style, eave_height=eave, rise=rise,
            color=spec.palette.roofs[roof_idx],
            intensity=float(rng.uniform(*spec.palette.roof_intensity_range)),
        ))

        free_cells = [rc for rc in cells if rc not in used]
        if spec.n_buildings - 1 > len(free_cells):
            raise InvalidSpec(
                f"{spec.n_buildings} buildings do not fit a {n_cy}x{n_cx} cell grid")
        for ident in range(1, spec.n_buildings):
            rc = free_cells.pop(0)
            used.add(rc)
            side_a = float(rng.uniform(*spec.footprint_range))
            side_b = float(rng.uniform(*spec.footprint_range))
            angle = rng.uniform(math.radians(3), math.radians(10))
            angle *= 1 if rng.random() < 0.5 else -1
            ca, sa = abs(math.cos(angle)), abs(math.sin(angle))
            bbox_w = side_a * ca + side_b * sa
            bbox_h = side_a * sa + side_b * ca
            scale = min(1.0, 0.92 * usable_x / bbox_w, 0.92 * usable_y / bbox_h)
            side_a *= scale
            side_b *= scale
            bbox_w *= scale
            bbox_h *= scale
            cx0, cy0 = _cell_center(*rc)
            slack_x = max(0.0, (usable_x - bbox_w) / 2)
            slack_y = max(0.0, (usable_y - bbox_h) / 2)
            cx = cx0 + float(rng.uniform(-slack_x, slack_x))
            cy = cy0 + float(rng.uniform(-slack_y, slack_y))
            eave = float(rng.uniform(*spec.height_range))
            style = "gable" if rng.random() < spec.gable_fraction else "flat"
            rise = float(rng.uniform(0.25, 0.45) * min(side_a, side_b) / 2) if style == "gable" else 0.0
            roof_idx = int(rng.integers(len(spec.palette.roofs)))
            buildings.append(Building(
                ident=ident, center=(cx, cy), half_w=side_a / 2, half_h=side_b / 2,
                angle=angle, style=style, eave_height=eave, rise=rise,
                color=spec.palette.roofs[roof_idx],
                intensity=float(rng.uniform(*spec.palette.roof_intensity_range)),
            ))

    # trees on leftover grass cells, well separated so opened canopies always
    # fall below the minimum building segment area
    trees: list[Tree] = []
    grass_cells = [rc for rc in cells if rc not in used]
    placed: list[tuple[float, float]] = []
    attempts = 0
    while len(trees) < spec.tree_count and grass_cells and attempts < spec.tree_count * 60:
        attempts += 1
        rc = grass_cells[int(rng.integers(len(grass_cells)))]
        cx0, cy0 = _cell_center(*rc)
        reach_x = max(0.5, usable_x / 2 - spec.tree_radius - 1.0)
        reach_y = max(0.5, usable_y / 2 - spec.tree_radius - 1.0)
        x = cx0 + float(rng.uniform(-reach_x, reach_x))
        y = cy0 + float(rng.uniform(-reach_y, reach_y))
        if any((x - px) ** 2 + (y - py) ** 2 < 6.0**2 for px, py in placed):
            continue
        placed.append((x, y))
        trees.append(Tree(center=(x, y), radius=spec.tree_radius,
                          height=float(rng.uniform(3.5, 5.0))))

    return buildings, trees, (pitch_x, pitch_y)


# --------------------------------------------------------------------------
# sampling and rendering

def _sample_cloud(spec: SceneSpec, buildings, trees, pitches, rng):
    w_m, h_m = spec.extent
    n = int(round(spec.density * w_m * h_m))
    xy = np.column_stack([rng.uniform(0, w_m, n), rng.uniform(0, h_m, n)])
    z = np.zeros(n)
    intensity = np.empty(n)
    classes = np.full(n, CLASS_GROUND, dtype=np.uint8)
    source = np.full(n, SOURCE_GROUND, dtype=np.int64)

    # ground material: road strips on the grid lines, grass elsewhere
    pitch_x, pitch_y = pitches
    on_road_x = np.abs(xy[:, 0] - np.round(xy[:, 0] / pitch_x) * pitch_x) <= spec.road_width / 2
    on_road_y = np.abs(xy[:, 1] - np.round(xy[:, 1] / pitch_y) * pitch_y) <= spec.road_width / 2
    on_road = on_road_x | on_road_y
    intensity[:] = np.where(on_road, spec.palette.road_intensity, spec.palette.grass_intensity)

    for b in buildings:
        inside = points_in_rotated_rect(xy, b.center, b.half_w, b.half_h, b.angle)
        if not np.any(inside):
            continue
        z[inside] = b.roof_z(xy[inside])
        intensity[inside] = b.intensity
        classes[inside] = CLASS_BUILDING
        source[inside] = b.ident

    for t in trees:
        d2 = (xy[:, 0] - t.center[0]) ** 2 + (xy[:, 1] - t.center[1]) ** 2
        inside = (d2 <= t.radius**2) & (source == SOURCE_GROUND)
        if not np.any(inside):
            continue
        z[inside] = t.height * rng.uniform(0.75, 1.0, int(inside.sum()))
        intensity[inside] = spec.palette.tree_intensity
        classes[inside] = CLASS_HIGH_VEG
        source[inside] = SOURCE_TREE

    if spec.sigma_z > 0:
        z += rng.normal(0.0, spec.sigma_z, n)
    if spec.intensity_noise > 0:
        intensity += rng.normal(0.0, spec.intensity_noise, n)
    intensity = np.clip(intensity, 0.0, 255.0)

    cloud = PointCloud(np.column_stack([xy, z]), intensity, classes)
    return cloud, source


def _render_image(spec: SceneSpec, pose: CameraPose, buildings, trees, pitches, rng):
    w_m, h_m = spec.extent
    n_cols = int(round(w_m / spec.gsd))
    n_rows = int(round(h_m / spec.gsd))
    p_mat = build_camera_matrix(pose)
    m_inv = np.linalg.inv(p_mat[:, :3])
    center = pose.center

    cols = np.arange(n_cols, dtype=float)
    rows = np.arange(n_rows, dtype=float)
    uu, vv = np.meshgrid(cols, rows)
    dirs = np.stack([uu.ravel(), vv.ravel(), np.ones(uu.size)])
    dirs = m_inv @ dirs  # (3, npx) ray directions, X(t) = C + t*d
    dz = dirs[2]
    dz = np.where(np.abs(dz) < 1e-15, 1e-15, dz)

    def plane_hit(height: float):
        t = (height - center[2]) / dz
        hx = center[0] + t * dirs[0]
        hy = center[1] + t * dirs[1]
        return hx, hy

    gx, gy = plane_hit(0.0)
    pitch_x, pitch_y = pitches
    on_road = (
        (np.abs(gx - np.round(gx / pitch_x) * pitch_x) <= spec.road_width / 2)
        | (np.abs(gy - np.round(gy / pitch_y) * pitch_y) <= spec.road_width / 2)
    )
    flat = np.empty((uu.size, 3), dtype=np.float64)
    flat[:] = spec.palette.grass
    flat[on_road] = spec.palette.road

    # paint roofs in ascending eave order (taller last); plan footprints are
    # disjoint so the order only matters against trees, which never overlap
    for b in sorted(buildings, key=lambda b: b.eave_height):
        hx, hy = plane_hit(b.eave_height)
        inside = points_in_rotated_rect(
            np.stack([hx, hy], axis=-1), b.center, b.half_w, b.half_h, b.angle
        )
        flat[inside] = b.color

    for t in sorted(trees, key=lambda t: t.height):
        hx, hy = plane_hit(t.height)
        inside = (hx - t.center[0]) ** 2 + (hy - t.center[1]) ** 2 <= t.radius**2
        flat[inside] = spec.palette.tree

    rgb = flat.reshape(n_rows, n_cols, 3)
    if spec.image_noise > 0:
        rgb = rgb + rng.normal(0.0, spec.image_noise, rgb.shape)
    rgb = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)

    # georeferencing of the NOMINAL frame: pixel (0,0) center, north-up
    ox = w_m / 2.0 - (n_cols - 1) / 2.0 * spec.gsd
    oy = h_m / 2.0 + (n_rows - 1) / 2.0 * spec.gsd
    return OpticalImage(rgb=rgb, gsd=spec.gsd, origin=(ox, oy))


def generate_scene(spec: SceneSpec, true_pose: CameraPose | None = None):
    """Build (cloud, image, truth).

    ``true_pose`` defaults to the nominal nadir pose; passing a perturbed pose
    renders the image misregistered relative to the cloud's coordinates,
    which is the initial condition the pipeline is meant to fix.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    buildings, trees, pitches = _layout(spec, rng)
    cloud, source = _sample_cloud(spec, buildings, trees, pitches, rng)
    nominal = nominal_pose(spec.extent, spec.gsd, spec.flying_height)
    pose = true_pose if true_pose is not None else nominal
    image = _render_image(spec, pose, buildings, trees, pitches, rng)
    truth = GroundTruth(
        pose=pose,
        nominal_pose=nominal,
        buildings=buildings,
        trees=trees,
        point_source=source,
        spec=spec,
    )
    return cloud, image, truth


def temporal_variant(cloud: PointCloud, truth: GroundTruth, remove_ids):
    """Drop whole buildings from the cloud (a newer LiDAR epoch).

    The image and the remaining truth stay untouched; removed ids must exist.
    """
    remove = sorted(set(int(i) for i in remove_ids))
    known = {b.ident for b in truth.buildings}
    for ident in remove:
        if ident not in known:
            raise UnknownBuilding(f"scene has no building {ident}")
    keep_mask = ~np.isin(truth.point_source, remove)
    new_cloud = cloud.subset(keep_mask)
    new_truth = GroundTruth(
        pose=truth.pose,
        nominal_pose=truth.nominal_pose,
        buildings=[b for b in truth.buildings if b.ident not in remove],
        trees=list(truth.trees),
        point_source=truth.point_source[keep_mask],
        spec=truth.spec,
    )
    return new_cloud, new_truth


def scene_frame(spec: SceneSpec) -> Frame:
    return Frame(
        n_rows=int(round(spec.extent[1] / spec.gsd)),
        n_cols=int(round(spec.extent[0] / spec.gsd)),
    )


def true_pixels(truth: GroundTruth, points3d: np.ndarray) -> np.ndarray:
    """Project 3-D truth points with the true pose (exact image locations)."""
    p_mat = build_camera_matrix(truth.pose)
    pixels, _, _ = project_points(p_mat, np.asarray(points3d, dtype=float))
    return pixels
