"""Gap filling of point-cloud rasters by proximal-gradient propagation.

Projecting a sparse cloud into a fine pixel grid leaves most cells empty.
The transferred values are kept fixed while the remaining cells are filled
by minimizing a smoothness-plus-sparsity cost (sum of squared forward
differences plus an L1 term) with FISTA.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraPose, Frame, build_camera_matrix, project_points
from .errors import NoVisiblePoints
from .pointcloud import PointCloud

# Largest eigenvalue bound of twice the difference operator's normal matrix:
# each of the two forward-difference stencils contributes at most 4.
LIPSCHITZ_BOUND = 16.0


@dataclass(frozen=True)
class FistaConfig:
    lam: float = 1e-3  # L1 weight
    gamma: float = 1.0 / 16.0  # step size; must not exceed 1/L
    k_max: int = 1000
    epsilon: float = 1e-4  # per-pixel RMS change threshold

    def validate(self) -> None:
        if not 0 < self.gamma <= 1.0 / LIPSCHITZ_BOUND + 1e-12:
            raise ValueError(
                f"gamma must lie in (0, {1.0 / LIPSCHITZ_BOUND}] "
                f"(1/L for the difference operator), got {self.gamma}"
            )
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.k_max < 0:
            raise ValueError("k_max must be >= 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


@dataclass
class SparseRaster:
    """A pixel grid holding transferred values where mask is True, 0 elsewhere."""

    frame: Frame
    values: np.ndarray  # (n_rows, n_cols) float64
    mask: np.ndarray  # (n_rows, n_cols) bool

    def __post_init__(self):
        expected = (self.frame.n_rows, self.frame.n_cols)
        if self.values.shape != expected or self.mask.shape != expected:
            raise ValueError("raster arrays must match the frame dimensions")

    @property
    def n_transferred(self) -> int:
        return int(self.mask.sum())


def _channel_values(cloud: PointCloud, channel: str) -> np.ndarray:
    if channel == "z":
        return cloud.z
    if channel == "i":
        return cloud.intensity
    raise ValueError(f"unknown channel {channel!r} (expected 'z' or 'i')")


def transfer_values(
    cloud: PointCloud,
    pose: CameraPose,
    frame: Frame,
    channel: str = "z",
    origin=(0.0, 0.0),
) -> SparseRaster:
    """Project the cloud through the camera and sample one value per pixel.

    Pixels are taken at the nearest integer position after subtracting
    ``origin`` (a column/row offset for patch-local grids).  When several
    points land in one pixel the smallest camera depth wins; among equal
    depths the highest point index wins.
    """
    values = _channel_values(cloud, channel).astype(np.float64)
    pixels, depth, valid = project_points(build_camera_matrix(pose), cloud.xyz)
    cols = np.rint(pixels[:, 0] - origin[0]).astype(np.int64)
    rows = np.rint(pixels[:, 1] - origin[1]).astype(np.int64)
    inside = (
        valid
        & (rows >= 0)
        & (rows < frame.n_rows)
        & (cols >= 0)
        & (cols < frame.n_cols)
    )
    if not np.any(inside):
        raise NoVisiblePoints("no cloud point projects into the frame")
    rows, cols = rows[inside], cols[inside]
    vals, dep = values[inside], depth[inside]
    # write in order of descending depth so the nearest point lands last
    order = np.lexsort((np.arange(rows.size), -dep))
    grid = np.zeros((frame.n_rows, frame.n_cols))
    mask = np.zeros((frame.n_rows, frame.n_cols), dtype=bool)
    grid[rows[order], cols[order]] = vals[order]
    mask[rows[order], cols[order]] = True
    return SparseRaster(frame, grid, mask)


def transfer_values_ortho(
    cloud: PointCloud,
    gsd: float,
    image_origin,
    frame: Frame,
    channel: str = "z",
    origin=(0.0, 0.0),
) -> SparseRaster:
    """Vertical (affine) transfer: x/y map straight to columns/rows.

    Collisions keep the highest point -- the one an overhead view exposes.
    """
    values = _channel_values(cloud, channel).astype(np.float64)
    cols = np.rint((cloud.x - image_origin[0]) / gsd - origin[0]).astype(np.int64)
    rows = np.rint((image_origin[1] - cloud.y) / gsd - origin[1]).astype(np.int64)
    inside = (
        (rows >= 0) & (rows < frame.n_rows) & (cols >= 0) & (cols < frame.n_cols)
    )
    if not np.any(inside):
        raise NoVisiblePoints("no cloud point falls inside the frame")
    rows, cols = rows[inside], cols[inside]
    vals, z = values[inside], cloud.z[inside]
    order = np.lexsort((np.arange(rows.size), z))  # highest z written last
    grid = np.zeros((frame.n_rows, frame.n_cols))
    mask = np.zeros((frame.n_rows, frame.n_cols), dtype=bool)
    grid[rows[order], cols[order]] = vals[order]
    mask[rows[order], cols[order]] = True
    return SparseRaster(frame, grid, mask)


def shrink(x: np.ndarray, alpha: float) -> np.ndarray:
    """Soft-threshold operator: sign(x) * max(|x| - alpha, 0)."""
    return np.sign(x) * np.maximum(np.abs(x) - alpha, 0.0)


def ssdg_value_and_gradient(phi: np.ndarray):
    """Sum of squared forward differences (replicate boundary) and its gradient.

    The gradient is exactly twice the difference operator's normal matrix
    applied to phi; its Lipschitz constant is bounded by 16.
    """
    phi = np.asarray(phi)
    dx = np.zeros_like(phi)
    dy = np.zeros_like(phi)
    dx[:, :-1] = phi[:, 1:] - phi[:, :-1]
    dy[:-1, :] = phi[1:, :] - phi[:-1, :]
    value = float(np.sum(dx * dx) + np.sum(dy * dy))
    gx = -dx
    gx[:, 1:] += dx[:, :-1]
    gy = -dy
    gy[1:, :] += dy[:-1, :]
    return value, 2.0 * (gx + gy)


def _ssdg_gradient_inplace(phi, dx, dy, grad):
    """Gradient of the squared-difference cost into preallocated buffers."""
    np.subtract(phi[:, 1:], phi[:, :-1], out=dx[:, :-1])
    dx[:, -1] = 0.0
    np.subtract(phi[1:, :], phi[:-1, :], out=dy[:-1, :])
    dy[-1, :] = 0.0
    np.negative(dx, out=grad)
    grad[:, 1:] += dx[:, :-1]
    grad -= dy
    grad[1:, :] += dy[:-1, :]
    grad *= 2.0
    return grad


def propagate_fista(sparse: SparseRaster, config: FistaConfig | None = None,
                    work_dtype=np.float64):
    """Fill the unsampled pixels of a sparse raster by accelerated descent.

    Sampled pixels are pinned to their transferred values on every
    iteration; the rest start at zero and follow FISTA steps on the
    smoothness cost with soft thresholding for the L1 term.  Iteration
    stops after ``k_max`` steps or when the per-pixel RMS change of the
    extrapolated iterate drops below ``epsilon``.  Returns ``(phi, info)``
    where info reports convergence without raising.
    """
    config = config or FistaConfig()
    config.validate()
    fixed = sparse.mask
    free = ~fixed
    phi_spa = sparse.values.astype(np.float64, copy=True)
    phi_spa[free] = 0.0
    info = {"converged": True, "iterations": 0, "final_change": 0.0,
            "n_transferred": sparse.n_transferred}
    if not np.any(free) or config.k_max == 0:
        info["converged"] = bool(not np.any(free))
        return phi_spa, info

    gamma = config.gamma
    thresh = config.lam * gamma
    y = phi_spa.astype(work_dtype, copy=True)
    x_prev = y.copy()
    fixed_vals = phi_spa[fixed].astype(work_dtype)
    dx = np.zeros_like(y)
    dy = np.zeros_like(y)
    grad = np.zeros_like(y)
    t_prev = 1.0
    converged = False
    iterations = 0
    change = 0.0
    inv_n = 1.0 / y.size
    for _ in range(config.k_max):
        _ssdg_gradient_inplace(y, dx, dy, grad)
        x_new = y - gamma * grad
        np.sign(x_new, out=grad)  # reuse grad as scratch for the shrink
        np.abs(x_new, out=x_new)
        x_new -= thresh
        np.maximum(x_new, 0.0, out=x_new)
        x_new *= grad
        x_new[fixed] = fixed_vals
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_prev * t_prev))
        beta = (t_prev - 1.0) / t_new
        y_new = x_new + beta * (x_new - x_prev)
        y_new[fixed] = fixed_vals
        diff = y_new - y
        change = float(np.sqrt(np.dot(diff.ravel(), diff.ravel()) * inv_n))
        x_prev = x_new
        y = y_new
        t_prev = t_new
        iterations += 1
        if change < config.epsilon:
            converged = True
            break
    phi = y.astype(np.float64)
    phi[fixed] = phi_spa[fixed]  # transferred samples pass through untouched
    info.update(converged=converged, iterations=iterations, final_change=change)
    return phi, info


def super_resolve(
    cloud: PointCloud,
    pose: CameraPose,
    frame: Frame,
    config: FistaConfig | None = None,
    channel: str = "z",
    origin=(0.0, 0.0),
    work_dtype=np.float64,
):
    """Transfer and propagate one channel; returns ``(raster, info)``.

    Intensities are normalized to [0, 1] for the descent and rescaled
    afterwards; either way the pixels that received a point carry their
    original values bit for bit.
    """
    sparse = transfer_values(cloud, pose, frame, channel, origin)
    return resolve_sparse(sparse, config, channel, work_dtype)


def resolve_sparse(sparse: SparseRaster, config: FistaConfig | None = None,
                   channel: str = "z", work_dtype=np.float64):
    """Propagate an already-transferred sparse raster (see super_resolve)."""
    if channel == "i":
        scaled = SparseRaster(sparse.frame, sparse.values / 255.0, sparse.mask)
        phi, info = propagate_fista(scaled, config, work_dtype)
        phi *= 255.0
    else:
        phi, info = propagate_fista(sparse, config, work_dtype)
    phi[sparse.mask] = sparse.values[sparse.mask]
    return phi, info
