"""Patch-wise similarity registration and pose-field interpolation.

The frame is tiled into patches; inside each patch a Nelder-Mead search over
the six external camera parameters maximizes the similarity between the
optical patch and rasters rendered from the cloud (mutual information, or a
normalized combined variant that also consumes the height channel).  The
per-patch poses are then blended into a smooth pose field by inverse
distance weighting and the cloud is rendered once more with per-point poses.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.optimize

from .camera import POSE_FIELDS, CameraPose, Frame, build_camera_matrix, project_points
from .errors import (
    DegenerateEntropy,
    FrameMismatch,
    FrameTooSmall,
    InputError,
    NotNormalized,
    NoVisiblePoints,
)
from .pointcloud import PointCloud
from .superres import FistaConfig, SparseRaster, resolve_sparse, transfer_values

_ANGLE_FIELDS = slice(8, 11)  # omega, phi, kappa positions in a parameter vector


@dataclass(frozen=True)
class HistogramSpec:
    bins: int = 64
    ranges: tuple | None = None  # optional (min, max) per variable

    def validate(self) -> None:
        if self.bins < 2:
            raise ValueError("need at least 2 bins")


@dataclass(frozen=True)
class FineConfig:
    objective: str = "mi"  # "mi" or "ncmi"
    patch_width: int = 500
    patch_height: int = 550
    margin: float = 50.0  # px halo of cloud points kept around each patch
    bins: int = 64  # 2-D joint histogram
    ncmi_bins: int = 32  # 3-D joint histogram
    step_position: float = 1.0  # m, initial simplex offsets
    step_angle: float = math.radians(0.2)
    fatol: float = 1e-5
    max_evals: int = 200
    inner_k_max: int = 60  # propagation budget inside the objective
    workers: int = 1

    def validate(self) -> None:
        if self.objective not in ("mi", "ncmi"):
            raise ValueError(f"objective must be 'mi' or 'ncmi', got {self.objective!r}")
        if self.patch_width < 1 or self.patch_height < 1:
            raise ValueError("patch dimensions must be positive")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


# --- histogram similarity --------------------------------------------------

def joint_histogram(images, spec: HistogramSpec | None = None) -> np.ndarray:
    """Joint probability table of 2 or 3 equally-shaped images."""
    spec = spec or HistogramSpec()
    spec.validate()
    arrays = [np.asarray(img, dtype=np.float64) for img in images]
    if not arrays or arrays[0].size == 0:
        raise ValueError("need at least one non-empty image")
    for arr in arrays[1:]:
        if arr.shape != arrays[0].shape:
            raise FrameMismatch(
                f"images must share a frame, got {arr.shape} vs {arrays[0].shape}"
            )
    arrays = [arr.ravel() for arr in arrays]
    if spec.ranges is not None:
        if len(spec.ranges) != len(arrays):
            raise ValueError("one (min, max) range per image required")
        ranges = [tuple(r) for r in spec.ranges]
    else:
        ranges = [(float(a.min()), float(a.max())) for a in arrays]
    ranges = [(lo, hi if hi > lo else lo + 1.0) for lo, hi in ranges]
    counts, _ = np.histogramdd(
        np.stack(arrays, axis=1), bins=spec.bins, range=ranges
    )
    total = counts.sum()
    if total == 0:
        raise DegenerateEntropy("all samples fall outside the histogram ranges")
    return counts / total


def entropy(pdf: np.ndarray) -> float:
    """Shannon entropy in bits of a (joint) probability table."""
    p = np.asarray(pdf, dtype=np.float64).ravel()
    total = float(p.sum())
    if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=1e-9):
        raise NotNormalized(f"probability mass sums to {total!r}, not 1")
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def mutual_information(a, b, spec: HistogramSpec | None = None) -> float:
    """MI in bits; marginals are taken from the joint table itself."""
    pab = joint_histogram([a, b], spec)
    pa = pab.sum(axis=1)
    pb = pab.sum(axis=0)
    return entropy(pa) + entropy(pb) - entropy(pab)


def ncmi(intensity_img, height_img, luma_img, spec: HistogramSpec | None = None) -> float:
    """Normalized combined MI of the rendered pair against the optical luma.

    Computed as (H(intensity, height) + H(luma)) / H(all three); lies in
    [1, 2], larger when the rendered channels jointly explain the image.
    """
    spec = spec or HistogramSpec(bins=32)
    pabc = joint_histogram([intensity_img, height_img, luma_img], spec)
    h_abc = entropy(pabc)
    if h_abc == 0:
        raise DegenerateEntropy("three-way joint entropy is zero")
    pab = pabc.sum(axis=2)
    pc = pabc.sum(axis=(0, 1))
    return (entropy(pab) + entropy(pc)) / h_abc


# --- patch layout ----------------------------------------------------------

@dataclass
class Patch:
    pr: int
    pc: int
    row0: int
    row1: int
    col0: int
    col1: int
    center: np.ndarray  # (2,) x = column, y = row
    point_index: np.ndarray

    @property
    def frame(self) -> Frame:
        return Frame(self.row1 - self.row0, self.col1 - self.col0)


@dataclass
class PatchGrid:
    frame: Frame
    n_prows: int
    n_pcols: int
    row_edges: np.ndarray  # (n_prows + 1,)
    col_edges: np.ndarray
    patches: list  # row-major


def partition_patches(
    frame: Frame,
    cloud: PointCloud,
    pose: CameraPose,
    patch_width: int = 500,
    patch_height: int = 550,
    margin: float = 50.0,
) -> PatchGrid:
    """Tile the frame and attach to each tile the cloud points that project
    near it under ``pose``.

    Tiles are patch_width x patch_height; the division remainder widens the
    last column and the last row.  A frame smaller than one patch is refused.
    """
    if frame.n_cols < patch_width or frame.n_rows < patch_height:
        raise FrameTooSmall(
            f"frame {frame.n_rows}x{frame.n_cols} cannot hold a "
            f"{patch_height}x{patch_width} patch"
        )
    n_pcols = frame.n_cols // patch_width
    n_prows = frame.n_rows // patch_height
    col_edges = np.array([i * patch_width for i in range(n_pcols)] + [frame.n_cols])
    row_edges = np.array([i * patch_height for i in range(n_prows)] + [frame.n_rows])

    pixels, _, valid = project_points(build_camera_matrix(pose), cloud.xyz)
    px = np.where(valid, pixels[:, 0], np.inf)
    py = np.where(valid, pixels[:, 1], np.inf)

    patches = []
    for pr in range(n_prows):
        for pc in range(n_pcols):
            row0, row1 = int(row_edges[pr]), int(row_edges[pr + 1])
            col0, col1 = int(col_edges[pc]), int(col_edges[pc + 1])
            mask = (
                (px >= col0 - margin)
                & (px < col1 + margin)
                & (py >= row0 - margin)
                & (py < row1 + margin)
            )
            patches.append(
                Patch(
                    pr=pr,
                    pc=pc,
                    row0=row0,
                    row1=row1,
                    col0=col0,
                    col1=col1,
                    center=np.array([(col0 + col1 - 1) / 2.0, (row0 + row1 - 1) / 2.0]),
                    point_index=np.flatnonzero(mask),
                )
            )
    return PatchGrid(
        frame=frame,
        n_prows=n_prows,
        n_pcols=n_pcols,
        row_edges=row_edges,
        col_edges=col_edges,
        patches=patches,
    )


# --- per-patch optimization ------------------------------------------------

@dataclass
class PatchResult:
    pr: int
    pc: int
    center: np.ndarray
    pose: CameraPose
    value: float
    init_value: float
    n_evals: int
    fallback: bool
    n_points: int


def gain_percent(initial: float, final: float) -> float:
    """Improvement of a similarity value as a percentage, one decimal.

    Computed as final/initial - 1 and truncated (not rounded) to a tenth
    of a percent, the convention reference report tables use: 0.615 ->
    0.661 reads as +7.4%.
    """
    if not (math.isfinite(initial) and math.isfinite(final)) or initial == 0:
        return float("nan")
    return math.trunc((final / initial - 1.0) * 1000.0) / 10.0


class PatchObjective:
    """Callable similarity of a patch as a function of the six externals."""

    PENALTY = -1.0  # returned when a pose renders nothing usable

    def __init__(self, cloud: PointCloud, luma_patch: np.ndarray, patch_frame: Frame,
                 origin, pose_template: CameraPose, config: FineConfig,
                 fista: FistaConfig):
        self.cloud = cloud
        self.luma = np.asarray(luma_patch, dtype=np.float64)
        self.frame = patch_frame
        self.origin = origin
        self.template = pose_template
        self.config = config
        self.fista = replace(fista, k_max=config.inner_k_max)
        if len(cloud) and config.objective == "ncmi":
            z_lo, z_hi = float(cloud.z.min()), float(cloud.z.max())
            self.z_range = (z_lo, z_hi if z_hi > z_lo else z_lo + 1.0)
        else:
            self.z_range = (0.0, 1.0)

    def _render(self, pose: CameraPose, channel: str) -> np.ndarray:
        sparse = transfer_values(self.cloud, pose, self.frame, channel, self.origin)
        phi, _ = resolve_sparse(sparse, self.fista, channel, work_dtype=np.float32)
        return phi

    def __call__(self, externals: np.ndarray) -> float:
        pose = self.template.with_externals(externals)
        try:
            i_img = self._render(pose, "i")
            if self.config.objective == "mi":
                spec = HistogramSpec(self.config.bins, ((0.0, 255.0), (0.0, 255.0)))
                return mutual_information(i_img, self.luma, spec)
            z_img = self._render(pose, "z")
            spec = HistogramSpec(
                self.config.ncmi_bins,
                ((0.0, 255.0), self.z_range, (0.0, 255.0)),
            )
            return ncmi(i_img, z_img, self.luma, spec)
        except (DegenerateEntropy, NoVisiblePoints):
            return self.PENALTY


def optimize_patch(patch_cloud: PointCloud, luma_patch: np.ndarray, patch: Patch,
                   pose_init: CameraPose, config: FineConfig | None = None,
                   fista: FistaConfig | None = None) -> PatchResult:
    """Nelder-Mead refinement of the externals over one patch.

    ``patch_cloud`` holds only the points attached to the patch and
    ``luma_patch`` its window of the optical luma.  The returned pose is
    never worse than the initial one under the patch objective.  A patch
    with no cloud points keeps the initial pose and is flagged as a
    fallback.
    """
    config = config or FineConfig()
    config.validate()
    fista = fista or FistaConfig()
    if len(patch_cloud) == 0:
        return PatchResult(
            pr=patch.pr, pc=patch.pc, center=patch.center, pose=pose_init,
            value=float("nan"), init_value=float("nan"),
            n_evals=0, fallback=True, n_points=0,
        )
    objective = PatchObjective(
        patch_cloud, luma_patch, patch.frame, (patch.col0, patch.row0),
        pose_init, config, fista,
    )
    x0 = pose_init.externals
    steps = np.array([config.step_position] * 3 + [config.step_angle] * 3)
    simplex = np.vstack([x0, x0 + np.diag(steps)])
    init_value = objective(x0)

    result = scipy.optimize.minimize(
        lambda ext: -objective(ext),
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "maxfev": config.max_evals,
            "fatol": config.fatol,
            "xatol": float("inf"),
        },
    )
    best_value = -float(result.fun)
    best_ext = np.asarray(result.x, dtype=float)
    if not best_value >= init_value:  # NaN-safe: never regress below the start
        best_value, best_ext = init_value, x0
    return PatchResult(
        pr=patch.pr, pc=patch.pc, center=patch.center,
        pose=pose_init.with_externals(best_ext),
        value=best_value, init_value=init_value,
        n_evals=int(result.nfev) + 1, fallback=False,
        n_points=len(patch_cloud),
    )


def _patch_task(payload):
    """Top-level worker for process pools; rebuilds objects from arrays."""
    (idx, xyz, intensity, classes, luma_patch, patch_meta, pose_arr,
     config, fista) = payload
    patch = Patch(**patch_meta, point_index=np.arange(xyz.shape[0]))
    sub = PointCloud(xyz=xyz, intensity=intensity, classes=classes)
    pose_init = CameraPose.from_array(pose_arr)
    return idx, optimize_patch(sub, luma_patch, patch, pose_init, config, fista)


def optimize_patches(cloud: PointCloud, luma: np.ndarray, grid: PatchGrid,
                     pose_init: CameraPose, config: FineConfig | None = None,
                     fista: FistaConfig | None = None):
    """Optimize every patch, optionally across processes; order-stable."""
    config = config or FineConfig()
    config.validate()
    fista = fista or FistaConfig()
    results: list = [None] * len(grid.patches)
    if config.workers == 1:
        for i, patch in enumerate(grid.patches):
            sub = cloud.subset(patch.point_index)
            window = luma[patch.row0:patch.row1, patch.col0:patch.col1]
            results[i] = optimize_patch(sub, window, patch, pose_init, config, fista)
        return results
    payloads = []
    for i, patch in enumerate(grid.patches):
        sub = cloud.subset(patch.point_index)
        meta = dict(pr=patch.pr, pc=patch.pc, row0=patch.row0, row1=patch.row1,
                    col0=patch.col0, col1=patch.col1, center=patch.center)
        payloads.append(
            (i, sub.xyz, sub.intensity, sub.classes,
             np.ascontiguousarray(luma[patch.row0:patch.row1, patch.col0:patch.col1]),
             meta, pose_init.as_array(), config, fista)
        )
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        for idx, result in pool.map(_patch_task, payloads):
            results[idx] = result
    return results


# --- pose field ------------------------------------------------------------

def _wrap_to_pi(x):
    return (np.asarray(x) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass
class PoseField:
    grid: PatchGrid
    pose_init: CameraPose
    results: list  # PatchResult, row-major

    def _pose_matrix(self) -> np.ndarray:
        return np.array([r.pose.as_array() for r in self.results])

    def _centers(self) -> np.ndarray:
        return np.array([r.center for r in self.results])

    def _cell_of(self, x: float, y: float):
        pc = int(np.searchsorted(self.grid.col_edges, x, side="right")) - 1
        pr = int(np.searchsorted(self.grid.row_edges, y, side="right")) - 1
        pc = min(max(pc, 0), self.grid.n_pcols - 1)
        pr = min(max(pr, 0), self.grid.n_prows - 1)
        return pr, pc

    def _neighborhood(self, pr: int, pc: int):
        rows = range(max(pr - 1, 0), min(pr + 2, self.grid.n_prows))
        cols = range(max(pc - 1, 0), min(pc + 2, self.grid.n_pcols))
        return [r * self.grid.n_pcols + c for r in rows for c in cols]

    def pose_at(self, x: float, y: float) -> CameraPose:
        """Inverse-distance-weighted pose at a pixel position.

        Weights are 1/d^2 to the centers of the 3x3 patch neighborhood
        (clipped at the borders); a query exactly on a center returns that
        patch's pose.  Angles are blended after unwrapping around the
        initial pose so the mean never straddles the wrong side of the
        circle.
        """
        pr, pc = self._cell_of(x, y)
        idx = self._neighborhood(pr, pc)
        centers = self._centers()[idx]
        params = self._pose_matrix()[idx]
        d2 = np.sum((centers - np.array([x, y])) ** 2, axis=1)
        hit = np.flatnonzero(d2 < 1e-18)
        if hit.size:
            return CameraPose.from_array(params[hit[0]])
        ref = self.pose_init.as_array()[_ANGLE_FIELDS]
        unwrapped = params.copy()
        unwrapped[:, _ANGLE_FIELDS] = ref + _wrap_to_pi(params[:, _ANGLE_FIELDS] - ref)
        w = 1.0 / d2
        blended = (w[:, None] * unwrapped).sum(axis=0) / w.sum()
        return CameraPose.from_array(blended)

    def poses_at(self, xy: np.ndarray) -> np.ndarray:
        """Vectorized pose_at; returns an (n, 11) parameter matrix."""
        xy = np.asarray(xy, dtype=np.float64)
        n = xy.shape[0]
        out = np.empty((n, len(POSE_FIELDS)))
        pcs = np.clip(
            np.searchsorted(self.grid.col_edges, xy[:, 0], side="right") - 1,
            0, self.grid.n_pcols - 1,
        )
        prs = np.clip(
            np.searchsorted(self.grid.row_edges, xy[:, 1], side="right") - 1,
            0, self.grid.n_prows - 1,
        )
        centers = self._centers()
        params = self._pose_matrix()
        ref = self.pose_init.as_array()[_ANGLE_FIELDS]
        unwrapped = params.copy()
        unwrapped[:, _ANGLE_FIELDS] = ref + _wrap_to_pi(params[:, _ANGLE_FIELDS] - ref)
        cell = prs * self.grid.n_pcols + pcs
        for c in np.unique(cell):
            sel = np.flatnonzero(cell == c)
            idx = self._neighborhood(c // self.grid.n_pcols, c % self.grid.n_pcols)
            sub_centers = centers[idx]  # (m, 2)
            sub_params = unwrapped[idx]  # (m, 11)
            d2 = (
                (xy[sel, None, 0] - sub_centers[None, :, 0]) ** 2
                + (xy[sel, None, 1] - sub_centers[None, :, 1]) ** 2
            )
            exact_pt, exact_ctr = np.nonzero(d2 < 1e-18)
            w = 1.0 / np.maximum(d2, 1e-300)
            blend = (w @ sub_params) / w.sum(axis=1)[:, None]
            if exact_pt.size:
                blend[exact_pt] = sub_params[exact_ctr]
            out[sel] = blend
        return out


def project_with_field(field: PoseField, xyz: np.ndarray):
    """Project points, each under the pose blended at its hint position.

    The hint is the projection under the field's initial pose.  Returns
    ``(pixels, depth, valid)`` like the single-pose projector.
    """
    xyz = np.asarray(xyz, dtype=np.float64)
    hint_px, _, valid = project_points(build_camera_matrix(field.pose_init), xyz)
    pixels = np.full((xyz.shape[0], 2), np.nan)
    depth = np.zeros(xyz.shape[0])
    usable = np.flatnonzero(valid)
    if usable.size == 0:
        return pixels, depth, valid
    params = field.poses_at(hint_px[usable])

    # per-point projection under per-point parameters
    alpha_x, alpha_y, skew = params[:, 0], params[:, 1], params[:, 2]
    p_x, p_y = params[:, 3], params[:, 4]
    center = params[:, 5:8]
    omega, phi_a, kappa = params[:, 8], params[:, 9], params[:, 10]
    co, so = np.cos(omega), np.sin(omega)
    cp, sp = np.cos(phi_a), np.sin(phi_a)
    ck, sk = np.cos(kappa), np.sin(kappa)
    d = xyz[usable] - center
    xc = ck * cp * d[:, 0] + (ck * sp * so - sk * co) * d[:, 1] + (ck * sp * co + sk * so) * d[:, 2]
    yc = sk * cp * d[:, 0] + (sk * sp * so + ck * co) * d[:, 1] + (sk * sp * co - ck * so) * d[:, 2]
    zc = -sp * d[:, 0] + cp * so * d[:, 1] + cp * co * d[:, 2]
    ok = np.abs(zc) > 1e-12
    zc_safe = np.where(ok, zc, 1.0)
    u = (alpha_x * xc + skew * yc) / zc_safe + p_x
    v = alpha_y * yc / zc_safe + p_y
    pixels[usable, 0] = np.where(ok, u, np.nan)
    pixels[usable, 1] = np.where(ok, v, np.nan)
    depth[usable] = np.abs(zc)
    out_valid = valid.copy()
    out_valid[usable] &= ok
    return pixels, depth, out_valid


def render_registered(cloud: PointCloud, field: PoseField, frame: Frame,
                      channel: str = "i", fista: FistaConfig | None = None,
                      work_dtype=np.float64):
    """Render the cloud with a per-point pose taken from the pose field.

    Each point is projected under the pose interpolated at its initial
    (global-pose) image position; pixel collisions keep the smallest
    depth.  Returns ``(raster, info)``; info counts pixels onto which
    non-adjacent surface strips were folded (seam ghosting).
    """
    fista = fista or FistaConfig()
    pixels, depths, valid = project_with_field(field, cloud.xyz)
    usable = np.flatnonzero(valid)
    if usable.size == 0:
        raise NoVisiblePoints("no cloud point projects under the initial pose")
    values = (cloud.z if channel == "z" else cloud.intensity)[usable].astype(np.float64)
    u = pixels[usable, 0]
    v = pixels[usable, 1]
    zc = depths[usable]
    cols = np.rint(u).astype(np.int64)
    rows = np.rint(v).astype(np.int64)
    inside = (rows >= 0) & (rows < frame.n_rows) & (cols >= 0) & (cols < frame.n_cols)
    if not np.any(inside):
        raise NoVisiblePoints("no point lands inside the frame after blending")
    rows, cols = rows[inside], cols[inside]
    vals = values[inside]
    depth = zc[inside]

    # double-projection counter: a pixel conflicts when it collects points
    # that the initial pose saw more than 1.5 px apart, i.e. two separate
    # surface strips folded onto one spot.  A continuous pose field keeps
    # same-pixel claimants adjacent (<= ~1 px + rounding), so this stays 0;
    # a piecewise field ghosts at the seams and drives it up.
    hint_px, _, _ = project_points(build_camera_matrix(field.pose_init), cloud.xyz)
    hu = hint_px[usable, 0][inside]
    hv = hint_px[usable, 1][inside]
    pixel_id = rows * frame.n_cols + cols
    uniq, inv = np.unique(pixel_id, return_inverse=True)
    spans = []
    for coord in (hu, hv):
        lo = np.full(uniq.size, np.inf)
        hi = np.full(uniq.size, -np.inf)
        np.minimum.at(lo, inv, coord)
        np.maximum.at(hi, inv, coord)
        spans.append(hi - lo)
    conflicts = int(np.sum((spans[0] > 1.5) | (spans[1] > 1.5)))

    order = np.lexsort((np.arange(rows.size), -depth))
    grid_vals = np.zeros((frame.n_rows, frame.n_cols))
    mask = np.zeros((frame.n_rows, frame.n_cols), dtype=bool)
    grid_vals[rows[order], cols[order]] = vals[order]
    mask[rows[order], cols[order]] = True
    sparse = SparseRaster(frame, grid_vals, mask)
    raster, info = resolve_sparse(sparse, fista, channel, work_dtype)
    info["double_projection_pixels"] = conflicts
    return raster, info


# --- pose-field serialization ----------------------------------------------

_FIELD_COLUMNS = (
    ["pr", "pc", "center_x", "center_y"]
    + list(POSE_FIELDS)
    + ["value", "init_value", "n_evals", "fallback", "n_points"]
)


def write_pose_field(path, field: PoseField) -> None:
    with open(path, "w", encoding="ascii", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["n_prows", field.grid.n_prows, "n_pcols", field.grid.n_pcols,
             "n_rows", field.grid.frame.n_rows, "n_cols", field.grid.frame.n_cols]
        )
        writer.writerow(["init"] + [repr(float(v)) for v in field.pose_init.as_array()])
        writer.writerow(_FIELD_COLUMNS)
        for r in field.results:
            writer.writerow(
                [r.pr, r.pc, repr(float(r.center[0])), repr(float(r.center[1]))]
                + [repr(float(v)) for v in r.pose.as_array()]
                + [repr(float(r.value)), repr(float(r.init_value)),
                   r.n_evals, int(r.fallback), r.n_points]
            )


def read_pose_field(path, patch_width: int = 500, patch_height: int = 550) -> PoseField:
    with open(path, "r", encoding="ascii", newline="") as handle:
        reader = csv.reader(handle)
        rows = [row for row in reader if row]
    if len(rows) < 3:
        raise InputError(f"{path}: not a pose field file")
    try:
        head = rows[0]
        n_prows, n_pcols = int(head[1]), int(head[3])
        n_rows, n_cols = int(head[5]), int(head[7])
        pose_init = CameraPose.from_array([float(v) for v in rows[1][1:12]])
        results = []
        for row in rows[3:]:
            values = dict(zip(_FIELD_COLUMNS, row))
            pose = CameraPose.from_array(
                [float(values[name]) for name in POSE_FIELDS]
            )
            results.append(
                PatchResult(
                    pr=int(values["pr"]), pc=int(values["pc"]),
                    center=np.array([float(values["center_x"]), float(values["center_y"])]),
                    pose=pose, value=float(values["value"]),
                    init_value=float(values["init_value"]),
                    n_evals=int(values["n_evals"]),
                    fallback=bool(int(values["fallback"])),
                    n_points=int(values["n_points"]),
                )
            )
    except (ValueError, IndexError, KeyError) as exc:
        raise InputError(f"{path}: malformed pose field: {exc}") from exc
    if len(results) != n_prows * n_pcols:
        raise InputError(f"{path}: expected {n_prows * n_pcols} patches, got {len(results)}")
    frame = Frame(n_rows, n_cols)
    col_edges = np.array([i * patch_width for i in range(n_pcols)] + [n_cols])
    row_edges = np.array([i * patch_height for i in range(n_prows)] + [n_rows])
    patches = []
    for r in results:
        patches.append(
            Patch(pr=r.pr, pc=r.pc,
                  row0=int(row_edges[r.pr]), row1=int(row_edges[r.pr + 1]),
                  col0=int(col_edges[r.pc]), col1=int(col_edges[r.pc + 1]),
                  center=r.center, point_index=np.empty(0, dtype=int))
        )
    grid = PatchGrid(frame=frame, n_prows=n_prows, n_pcols=n_pcols,
                     row_edges=row_edges, col_edges=col_edges, patches=patches)
    return PoseField(grid=grid, pose_init=pose_init, results=results)
