"""Camera resection from 3-D/2-D point correspondences.

Normalized direct linear transform followed by a Levenberg-Marquardt
refinement of the geometric reprojection error, then decomposition into the
eleven physical camera parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .camera import CameraPose, build_camera_matrix, decompose_projection, project_points
from .errors import DegenerateConfiguration, SingularCamera, TooFewCorrespondences

MIN_CORRESPONDENCES = 6


@dataclass(frozen=True)
class Corr3D2D:
    world: np.ndarray  # (3,)
    pixel: np.ndarray  # (2,)


def _as_arrays(correspondences):
    world = np.array([np.asarray(c.world, dtype=float) for c in correspondences])
    pixel = np.array([np.asarray(c.pixel, dtype=float) for c in correspondences])
    if world.ndim != 2 or world.shape[1] != 3 or pixel.shape[1] != 2:
        raise ValueError("correspondences must pair 3-D world points with 2-D pixels")
    return world, pixel


def _normalization_3d(points: np.ndarray) -> np.ndarray:
    """4x4 transform: centroid to origin, RMS radius to sqrt(3)."""
    centroid = points.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((points - centroid) ** 2, axis=1)))
    scale = np.sqrt(3.0) / rms if rms > 0 else 1.0
    t = np.eye(4)
    t[:3, :3] *= scale
    t[:3, 3] = -scale * centroid
    return t


def _normalization_2d(points: np.ndarray) -> np.ndarray:
    """3x3 transform: centroid to origin, RMS radius to sqrt(2)."""
    centroid = points.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((points - centroid) ** 2, axis=1)))
    scale = np.sqrt(2.0) / rms if rms > 0 else 1.0
    t = np.eye(3)
    t[:2, :2] *= scale
    t[:2, 2] = -scale * centroid
    return t


def _check_not_coplanar(world: np.ndarray) -> None:
    centered = world - world.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[0] <= 0 or sv[2] / sv[0] < 1e-9:
        raise DegenerateConfiguration(
            "world points are coplanar (or collinear); resection is ambiguous"
        )


def _dlt(world_h: np.ndarray, pixel: np.ndarray) -> np.ndarray:
    n = world_h.shape[0]
    a = np.zeros((2 * n, 12))
    a[0::2, 4:8] = -world_h
    a[0::2, 8:12] = pixel[:, 1:2] * world_h
    a[1::2, 0:4] = world_h
    a[1::2, 8:12] = -pixel[:, 0:1] * world_h
    _, sv, vt = np.linalg.svd(a)
    if sv[10] / sv[0] < 1e-10:
        raise DegenerateConfiguration("design matrix rank below 11")
    return vt[-1].reshape(3, 4)


def _residuals(p_flat: np.ndarray, world_h: np.ndarray, pixel: np.ndarray) -> np.ndarray:
    p = p_flat.reshape(3, 4)
    proj = world_h @ p.T
    w = proj[:, 2]
    w = np.where(np.abs(w) < 1e-15, 1e-15, w)
    uv = proj[:, :2] / w[:, None]
    return (uv - pixel).ravel()


def reprojection_rmse(pose: CameraPose, correspondences) -> float:
    """Root-mean-square pixel distance between projections and observations."""
    world, pixel = _as_arrays(correspondences)
    projected, _, valid = project_points(build_camera_matrix(pose), world)
    if not np.all(valid):
        return float("inf")
    sq = np.sum((projected - pixel) ** 2, axis=1)
    return float(np.sqrt(sq.mean()))


def gold_standard(correspondences, max_iterations: int = 100) -> CameraPose:
    """Estimate a full camera pose from at least six correspondences.

    Both point sets are normalized, a linear solution is obtained by SVD,
    and the reprojection error is minimized with Levenberg-Marquardt over
    the twelve matrix entries.  The refined matrix is kept only if it beats
    the linear one.  Raises DegenerateConfiguration when the geometry cannot
    support a unique camera (too-low design rank or coplanar world points).
    """
    if len(correspondences) < MIN_CORRESPONDENCES:
        raise TooFewCorrespondences(
            f"need at least {MIN_CORRESPONDENCES} correspondences, got {len(correspondences)}"
        )
    world, pixel = _as_arrays(correspondences)
    _check_not_coplanar(world)

    t3 = _normalization_3d(world)
    t2 = _normalization_2d(pixel)
    world_h = np.column_stack([world, np.ones(len(world))]) @ t3.T
    pixel_h = np.column_stack([pixel, np.ones(len(pixel))]) @ t2.T
    pixel_n = pixel_h[:, :2]

    p_lin = _dlt(world_h, pixel_n)

    cost_lin = np.sum(_residuals(p_lin.ravel(), world_h, pixel_n) ** 2)
    try:
        fit = scipy.optimize.least_squares(
            _residuals,
            p_lin.ravel(),
            args=(world_h, pixel_n),
            method="lm",
            ftol=1e-12,
            xtol=1e-12,
            gtol=1e-12,
            max_nfev=max_iterations * 13,
        )
        p_ref = fit.x.reshape(3, 4)
        cost_ref = np.sum(fit.fun**2)
    except Exception:
        p_ref, cost_ref = p_lin, cost_lin
    p_norm = p_ref if cost_ref <= cost_lin else p_lin

    p = np.linalg.solve(t2, p_norm @ t3)
    try:
        return decompose_projection(p)
    except SingularCamera as exc:
        raise DegenerateConfiguration(f"estimated camera is singular: {exc}") from exc
