"""Finite projective camera model shared by every pipeline stage.

COORDINATE CONVENTIONS (fixed here once, never redefined elsewhere):

* World frame: right-handed, x east, y north, z up, meters.
* Rotation ``R = Rz(kappa) @ Ry(phi) @ Rx(omega)`` -- intrinsic x-then-y-then-z
  composition, angles in radians, counterclockwise positive about each axis.
* Projection ``P = K R [I | -C]`` maps homogeneous world points to homogeneous
  pixel coordinates; dehomogenization divides by the third coordinate, so P is
  meaningful only up to a global (signed) scale.
* Pixel coordinates: origin at the CENTER of the top-left pixel, x = column
  index, y = row index, growing right and down.
* A nadir-looking aerial camera has omega near pi: the half turn about the
  x-axis points the optical axis at the ground, keeps projective depth
  (Z0 - z) positive for scene points below the camera, and renders east-right,
  north-up images with positive focal terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import DegenerateProjection, SingularCamera

__all__ = [
    "Frame",
    "CameraPose",
    "rotation_from_angles",
    "angles_from_rotation",
    "calibration_matrix",
    "build_camera_matrix",
    "project_point",
    "project_points",
    "decompose_projection",
    "write_pose",
    "read_pose",
    "pose_from_text",
    "pose_to_text",
]

# Order used for text serialization and array round-trips.
POSE_FIELDS = (
    "alpha_x", "alpha_y", "skew", "p_x", "p_y",
    "x0", "y0", "z0", "omega", "phi", "kappa",
)

EXTERNAL_FIELDS = ("x0", "y0", "z0", "omega", "phi", "kappa")


@dataclass(frozen=True)
class Frame:
    """Raster extent in pixels: ``n_rows`` x ``n_cols``."""

    n_rows: int
    n_cols: int

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError(f"frame must be at least 1x1, got {self.n_rows}x{self.n_cols}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)


@dataclass(frozen=True)
class CameraPose:
    """Eleven-parameter pose: five internal, six external.

    Internal: ``alpha_x``/``alpha_y`` focal terms in pixels (> 0), ``skew``,
    and principal point ``p_x``/``p_y`` (pixels).  External: projection center
    ``x0``/``y0``/``z0`` (m) and rotation angles ``omega``/``phi``/``kappa``
    (rad).
    """

    alpha_x: float
    alpha_y: float
    skew: float
    p_x: float
    p_y: float
    x0: float
    y0: float
    z0: float
    omega: float
    phi: float
    kappa: float

    def __post_init__(self):
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            raise ValueError("camera pose parameters must all be finite")
        if self.alpha_x <= 0 or self.alpha_y <= 0:
            raise ValueError("alpha_x and alpha_y must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in POSE_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, values) -> "CameraPose":
        values = np.asarray(values, dtype=float)
        if values.shape != (len(POSE_FIELDS),):
            raise ValueError(f"expected {len(POSE_FIELDS)} parameters, got {values.shape}")
        return cls(**dict(zip(POSE_FIELDS, values.tolist())))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x0, self.y0, self.z0], dtype=float)

    @property
    def externals(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in EXTERNAL_FIELDS], dtype=float)

    def with_externals(self, externals) -> "CameraPose":
        externals = np.asarray(externals, dtype=float)
        if externals.shape != (6,):
            raise ValueError("expected 6 external parameters")
        return replace(self, **dict(zip(EXTERNAL_FIELDS, externals.tolist())))


def rotation_from_angles(omega: float, phi: float, kappa: float) -> np.ndarray:
    """Rotation matrix ``Rz(kappa) @ Ry(phi) @ Rx(omega)``."""
    co, so = math.cos(omega), math.sin(omega)
    cp, sp = math.cos(phi), math.sin(phi)
    ck, sk = math.cos(kappa), math.sin(kappa)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, co, -so], [0.0, so, co]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rz = np.array([[ck, -sk, 0.0], [sk, ck, 0.0], [0.0, 0.0, 1.0]])
    return rz @ ry @ rx


def angles_from_rotation(rotation: np.ndarray) -> tuple[float, float, float]:
    """Invert :func:`rotation_from_angles` (valid away from |phi| = pi/2)."""
    r = np.asarray(rotation, dtype=float)
    phi = math.asin(max(-1.0, min(1.0, -r[2, 0])))
    omega = math.atan2(r[2, 1], r[2, 2])
    kappa = math.atan2(r[1, 0], r[0, 0])
    return omega, phi, kappa


def calibration_matrix(pose: CameraPose) -> np.ndarray:
    """Upper-triangular K with positive diagonal."""
    return np.array(
        [
            [pose.alpha_x, pose.skew, pose.p_x],
            [0.0, pose.alpha_y, pose.p_y],
            [0.0, 0.0, 1.0],
        ]
    )


def build_camera_matrix(pose: CameraPose) -> np.ndarray:
    """3x4 projection matrix ``K R [I | -C]``."""
    k = calibration_matrix(pose)
    r = rotation_from_angles(pose.omega, pose.phi, pose.kappa)
    m = k @ r
    p = np.empty((3, 4))
    p[:, :3] = m
    p[:, 3] = -m @ pose.center
    return p


def project_point(p_matrix: np.ndarray, point) -> np.ndarray:
    """Project one 3-D world point to pixel coordinates (x=col, y=row).

    Raises:
        DegenerateProjection: when the point lies on the principal plane and
            the homogeneous scale vanishes.
    """
    point = np.asarray(point, dtype=float)
    hom = p_matrix[:, :3] @ point + p_matrix[:, 3]
    w = hom[2]
    if abs(w) < 1e-12:
        raise DegenerateProjection("point on the camera principal plane (w = 0)")
    return hom[:2] / w


def project_points(p_matrix: np.ndarray, points: np.ndarray):
    """Vectorized projection of an (n, 3) array.

    Returns ``(pixels, depth, valid)`` where ``pixels`` is (n, 2), ``depth``
    is the absolute homogeneous scale |w| (distance along the principal axis),
    and ``valid`` flags points off the principal plane.  Invalid rows hold NaN.
    """
    points = np.asarray(points, dtype=float)
    hom = points @ p_matrix[:, :3].T + p_matrix[:, 3]
    w = hom[:, 2]
    valid = np.abs(w) > 1e-12
    pixels = np.full((points.shape[0], 2), np.nan)
    np.divide(hom[:, :2], w[:, None], out=pixels, where=valid[:, None])
    return pixels, np.abs(w), valid


def decompose_projection(p_matrix: np.ndarray) -> CameraPose:
    """Recover the eleven-parameter pose from a 3x4 projection matrix.

    RQ factorization of the left 3x3 block with the diagonal of K forced
    positive; the remaining sign ambiguity (P ~ -P) is absorbed by flipping R
    to det(R) = +1.

    Raises:
        SingularCamera: when the left 3x3 block is numerically singular.
    """
    p_matrix = np.asarray(p_matrix, dtype=float)
    if p_matrix.shape != (3, 4):
        raise ValueError(f"expected a 3x4 matrix, got {p_matrix.shape}")
    m = p_matrix[:, :3]
    scale = np.linalg.norm(m)
    if scale == 0 or abs(np.linalg.det(m)) < 1e-12 * scale**3:
        raise SingularCamera("left 3x3 block of P is singular")

    k, r = scipy.linalg.rq(m)
    signs = np.sign(np.diag(k))
    signs[signs == 0] = 1.0
    d = np.diag(signs)
    k = k @ d
    r = d @ r
    if np.linalg.det(r) < 0:
        r = -r  # P and -P are the same camera
    center = -np.linalg.solve(m, p_matrix[:, 3])
    k = k / k[2, 2]
    omega, phi, kappa = angles_from_rotation(r)
    return CameraPose(
        alpha_x=k[0, 0],
        alpha_y=k[1, 1],
        skew=k[0, 1],
        p_x=k[0, 2],
        p_y=k[1, 2],
        x0=center[0],
        y0=center[1],
        z0=center[2],
        omega=omega,
        phi=phi,
        kappa=kappa,
    )


# --- flat "name = value" text serialization ------------------------------

def pose_to_text(pose: CameraPose) -> str:
    lines = [f"{name} = {float(getattr(pose, name))!r}" for name in POSE_FIELDS]
    return "\n".join(lines) + "\n"


def pose_from_text(text: str) -> CameraPose:
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'name = value', got {raw!r}")
        name, _, value = line.partition("=")
        name = name.strip()
        if name not in POSE_FIELDS:
            raise ValueError(f"line {lineno}: unknown pose parameter {name!r}")
        values[name] = float(value.strip())
    missing = [name for name in POSE_FIELDS if name not in values]
    if missing:
        raise ValueError(f"missing pose parameters: {', '.join(missing)}")
    return CameraPose(**values)


def write_pose(path, pose: CameraPose) -> None:
    with open(path, "w", encoding="ascii") as handle:
        handle.write(pose_to_text(pose))


def read_pose(path) -> CameraPose:
    with open(path, "r", encoding="ascii") as handle:
        return pose_from_text(handle.read())
