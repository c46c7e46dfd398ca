"""LiDAR point cloud container and its on-disk formats.

Text format: one point per line, ``x y z intensity class``, class being an
integer code 0-5.  Binary format: little-endian records of four float64
followed by one uint8, no header.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

# Classification codes (text/binary value -> meaning).
CLASS_UNCLASSIFIED = 0
CLASS_GROUND = 1
CLASS_LOW_VEG = 2
CLASS_MEDIUM_VEG = 3
CLASS_HIGH_VEG = 4
CLASS_BUILDING = 5

CLASS_NAMES = {
    CLASS_UNCLASSIFIED: "unclassified",
    CLASS_GROUND: "ground",
    CLASS_LOW_VEG: "low vegetation",
    CLASS_MEDIUM_VEG: "medium vegetation",
    CLASS_HIGH_VEG: "high vegetation",
    CLASS_BUILDING: "building",
}

_RECORD_DTYPE = np.dtype(
    [("x", "<f8"), ("y", "<f8"), ("z", "<f8"), ("intensity", "<f8"), ("klass", "u1")]
)


@dataclass
class PointCloud:
    """Columnar point storage: ``xyz`` (n, 3) float64, ``intensity`` (n,)
    float64 in [0, 255], ``classes`` (n,) uint8 codes."""

    xyz: np.ndarray
    intensity: np.ndarray
    classes: np.ndarray

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=np.float64)
        self.intensity = np.asarray(self.intensity, dtype=np.float64)
        self.classes = np.asarray(self.classes, dtype=np.uint8)
        if self.xyz.ndim != 2 or self.xyz.shape[1] != 3:
            raise ValueError(f"xyz must be (n, 3), got {self.xyz.shape}")
        n = self.xyz.shape[0]
        if self.intensity.shape != (n,) or self.classes.shape != (n,):
            raise ValueError("xyz, intensity and classes must share length")

    def __len__(self) -> int:
        return self.xyz.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.xyz[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.xyz[:, 1]

    @property
    def z(self) -> np.ndarray:
        return self.xyz[:, 2]

    def subset(self, mask_or_index) -> "PointCloud":
        return PointCloud(
            self.xyz[mask_or_index],
            self.intensity[mask_or_index],
            self.classes[mask_or_index],
        )

    def validate(self) -> None:
        if not np.all(np.isfinite(self.xyz)):
            raise ValueError("non-finite coordinates in point cloud")
        if np.any(self.intensity < 0) or np.any(self.intensity > 255):
            raise ValueError("intensity outside [0, 255]")
        if np.any(self.classes > CLASS_BUILDING):
            raise ValueError("unknown classification code")


def write_cloud_text(path, cloud: PointCloud) -> None:
    with open(path, "w", encoding="ascii") as handle:
        for (x, y, z), i, c in zip(cloud.xyz, cloud.intensity, cloud.classes):
            handle.write(f"{float(x)!r} {float(y)!r} {float(z)!r} {float(i)!r} {int(c)}\n")


def read_cloud_text(path) -> PointCloud:
    xyz, inten, classes = [], [], []
    with open(path, "r", encoding="ascii") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 5:
                raise InputError(f"{path}: line {lineno}: expected 5 fields, got {len(parts)}")
            try:
                xyz.append([float(parts[0]), float(parts[1]), float(parts[2])])
                inten.append(float(parts[3]))
                klass = int(parts[4])
            except ValueError as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from exc
            if not 0 <= klass <= CLASS_BUILDING:
                raise InputError(f"{path}: line {lineno}: class code {klass} out of range")
            classes.append(klass)
    if not xyz:
        return PointCloud(np.empty((0, 3)), np.empty(0), np.empty(0, dtype=np.uint8))
    return PointCloud(np.array(xyz), np.array(inten), np.array(classes, dtype=np.uint8))


def write_cloud_binary(path, cloud: PointCloud) -> None:
    records = np.empty(len(cloud), dtype=_RECORD_DTYPE)
    records["x"] = cloud.xyz[:, 0]
    records["y"] = cloud.xyz[:, 1]
    records["z"] = cloud.xyz[:, 2]
    records["intensity"] = cloud.intensity
    records["klass"] = cloud.classes
    records.tofile(path)


def read_cloud_binary(path) -> PointCloud:
    records = np.fromfile(path, dtype=_RECORD_DTYPE)
    xyz = np.stack([records["x"], records["y"], records["z"]], axis=1)
    cloud = PointCloud(xyz, records["intensity"].astype(np.float64), records["klass"])
    return cloud


def read_cloud(path) -> PointCloud:
    """Dispatch on extension: ``.bin`` binary, anything else text."""
    if str(path).endswith(".bin"):
        return read_cloud_binary(path)
    return read_cloud_text(path)


def write_cloud(path, cloud: PointCloud) -> None:
    if str(path).endswith(".bin"):
        write_cloud_binary(path, cloud)
    else:
        write_cloud_text(path, cloud)
