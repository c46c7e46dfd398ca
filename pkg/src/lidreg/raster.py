"""Raster containers and raster I/O.

Two distinct grids appear in the pipeline and must not be confused:

* ``RasterImage`` -- a map-space grid used by LiDAR rasterization.  Cell
  (row, col) covers world x in [x0 + col*res, x0 + (col+1)*res) and likewise
  for y; row grows with +y.
* ``OpticalImage`` -- a camera image.  Pixel (0, 0) is the top-left pixel;
  its CENTER has the world coordinates stored in ``origin`` and row grows
  to the SOUTH (world y decreases), the usual north-up orthophoto layout.

Float grids are stored as a short ASCII header (rows, cols, channel, pose
hash) followed by raw little-endian float32, plus an optional 8/16-bit PNG
preview for inspection.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import InputError

__all__ = [
    "RasterImage",
    "OpticalImage",
    "read_image",
    "write_image",
    "write_float_grid",
    "read_float_grid",
    "write_grid_preview",
    "luma",
    "pose_digest",
]


@dataclass
class RasterImage:
    """Single-channel map-space grid with world anchoring."""

    values: np.ndarray
    origin: tuple[float, float]  # world (x, y) of the min corner of cell (0, 0)
    resolution: float

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ValueError("raster values must be 2-D")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def cell_of(self, x, y):
        """Map world coordinates to (row, col) cell indices."""
        col = np.floor((np.asarray(x) - self.origin[0]) / self.resolution).astype(int)
        row = np.floor((np.asarray(y) - self.origin[1]) / self.resolution).astype(int)
        return row, col


@dataclass
class OpticalImage:
    """8-bit RGB image with ground sample distance and georeferencing."""

    rgb: np.ndarray
    gsd: float
    origin: tuple[float, float] = (0.0, 0.0)  # world (x, y) of pixel (0,0) center

    def __post_init__(self):
        self.rgb = np.asarray(self.rgb)
        if self.rgb.ndim != 3 or self.rgb.shape[2] != 3:
            raise ValueError(f"rgb must be (rows, cols, 3), got {self.rgb.shape}")
        if self.rgb.dtype != np.uint8:
            raise ValueError("rgb must be uint8")
        if self.gsd <= 0:
            raise ValueError("gsd must be positive")

    @property
    def n_rows(self) -> int:
        return self.rgb.shape[0]

    @property
    def n_cols(self) -> int:
        return self.rgb.shape[1]

    def world_to_pixel(self, xy: np.ndarray) -> np.ndarray:
        """Vertical (orthographic) mapping of world (x, y) to pixel (x, y).

        This is the nominal georeferencing used for the initial overlay of
        vertically projected LiDAR data; row grows south, so +y maps to
        smaller pixel y.
        """
        xy = np.asarray(xy, dtype=float)
        px = (xy[..., 0] - self.origin[0]) / self.gsd
        py = (self.origin[1] - xy[..., 1]) / self.gsd
        return np.stack([px, py], axis=-1)

    def pixel_to_world(self, pix: np.ndarray) -> np.ndarray:
        pix = np.asarray(pix, dtype=float)
        x = self.origin[0] + pix[..., 0] * self.gsd
        y = self.origin[1] - pix[..., 1] * self.gsd
        return np.stack([x, y], axis=-1)


def luma(rgb: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma in [0, 255] as float64."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


# --- optical image I/O (PNG / PPM + sidecar georeferencing) --------------

def _meta_path(path) -> str:
    return str(path) + ".meta"


def write_image(path, image: OpticalImage) -> None:
    Image.fromarray(image.rgb, mode="RGB").save(str(path))
    with open(_meta_path(path), "w", encoding="ascii") as handle:
        handle.write(f"gsd = {float(image.gsd)!r}\n")
        handle.write(f"origin_x = {float(image.origin[0])!r}\n")
        handle.write(f"origin_y = {float(image.origin[1])!r}\n")


def read_image(path) -> OpticalImage:
    try:
        with Image.open(str(path)) as img:
            rgb = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except FileNotFoundError:
        raise
    except Exception as exc:  # Pillow raises a zoo of decode errors
        raise InputError(f"cannot decode image {path}: {exc}") from exc
    gsd, ox, oy = 1.0, 0.0, 0.0
    try:
        with open(_meta_path(path), "r", encoding="ascii") as handle:
            for line in handle:
                line = line.strip()
                if not line or "=" not in line:
                    continue
                key, _, value = line.partition("=")
                key = key.strip()
                if key == "gsd":
                    gsd = float(value)
                elif key == "origin_x":
                    ox = float(value)
                elif key == "origin_y":
                    oy = float(value)
    except FileNotFoundError:
        pass  # plain images default to gsd 1, origin (0, 0)
    return OpticalImage(rgb=rgb, gsd=gsd, origin=(ox, oy))


# --- float32 grid format --------------------------------------------------

def pose_digest(pose) -> str:
    """Short stable hash of a pose, stored in grid headers."""
    from .camera import pose_to_text

    return hashlib.sha256(pose_to_text(pose).encode("ascii")).hexdigest()[:12]


def write_float_grid(path, values: np.ndarray, channel: str, pose_hash: str = "") -> None:
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 2:
        raise ValueError("grid must be 2-D")
    header = (
        f"rows = {values.shape[0]}\n"
        f"cols = {values.shape[1]}\n"
        f"channel = {channel}\n"
        f"pose_hash = {pose_hash}\n"
        "end_header\n"
    )
    with open(path, "wb") as handle:
        handle.write(header.encode("ascii"))
        handle.write(values.astype("<f4").tobytes())


def read_float_grid(path):
    """Returns (values float32 array, channel, pose_hash)."""
    with open(path, "rb") as handle:
        meta = {}
        while True:
            line = handle.readline()
            if not line:
                raise InputError(f"{path}: truncated header")
            text = line.decode("ascii").strip()
            if text == "end_header":
                break
            key, _, value = text.partition("=")
            meta[key.strip()] = value.strip()
        try:
            rows, cols = int(meta["rows"]), int(meta["cols"])
        except (KeyError, ValueError) as exc:
            raise InputError(f"{path}: bad grid header") from exc
        data = np.frombuffer(handle.read(rows * cols * 4), dtype="<f4")
        if data.size != rows * cols:
            raise InputError(f"{path}: truncated grid payload")
    values = data.reshape(rows, cols).copy()
    return values, meta.get("channel", ""), meta.get("pose_hash", "")


def write_grid_preview(path, values: np.ndarray, bits: int = 16) -> None:
    """Scale a float grid to 8/16-bit grayscale PNG for visual checks."""
    values = np.asarray(values, dtype=np.float64)
    lo = float(np.nanmin(values)) if values.size else 0.0
    hi = float(np.nanmax(values)) if values.size else 1.0
    if hi <= lo:
        hi = lo + 1.0
    top = 65535 if bits == 16 else 255
    scaled = np.clip((values - lo) / (hi - lo) * top, 0, top)
    if bits == 16:
        Image.fromarray(scaled.astype(np.uint16), mode="I;16").save(str(path))
    else:
        Image.fromarray(scaled.astype(np.uint8), mode="L").save(str(path))
