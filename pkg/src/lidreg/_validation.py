"""Input coercion helpers shared by the estimator classes."""

from __future__ import annotations

import numpy as np
from sklearn.exceptions import NotFittedError

from .camera import CameraPose
from .pointcloud import PointCloud
from .raster import OpticalImage


def check_cloud(obj) -> PointCloud:
    """Accept a PointCloud or an (n, 3..5) array of x y z [intensity [class]]."""
    if isinstance(obj, PointCloud):
        return obj
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] < 3 or arr.shape[1] > 5:
        raise ValueError("expected a PointCloud or an (n, 3..5) array")
    n = arr.shape[0]
    intensity = arr[:, 3] if arr.shape[1] > 3 else np.zeros(n)
    classes = (
        arr[:, 4].astype(np.uint8) if arr.shape[1] > 4 else np.zeros(n, dtype=np.uint8)
    )
    return PointCloud(xyz=arr[:, :3].copy(), intensity=intensity.copy(), classes=classes)


def check_image(obj, gsd: float = 1.0) -> OpticalImage:
    """Accept an OpticalImage or a raw (rows, cols, 3) byte array."""
    if isinstance(obj, OpticalImage):
        return obj
    arr = np.asarray(obj)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError("expected an OpticalImage or an (r, c, 3) array")
    return OpticalImage(rgb=arr.astype(np.uint8), gsd=gsd, origin=(0.0, 0.0))


def check_pose(obj) -> CameraPose:
    if isinstance(obj, CameraPose):
        return obj
    arr = np.asarray(obj, dtype=np.float64).ravel()
    if arr.size != 11:
        raise ValueError("expected a CameraPose or an 11-vector")
    return CameraPose.from_array(arr)


def check_fitted(estimator, attributes) -> None:
    missing = [a for a in attributes if not hasattr(estimator, a)]
    if missing:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first "
            f"(missing {', '.join(missing)})"
        )
