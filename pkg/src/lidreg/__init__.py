"""Registration of airborne LiDAR point clouds to optical orthoimages.

The pipeline runs coarse-to-fine: building primitives extracted from the
cloud and the image are matched to resect a global camera pose, sparse
rasters rendered from the cloud are densified by proximal-gradient
propagation, and patch-wise similarity optimization refines the pose into a
smooth field used for the final per-point rendering.
"""

from .camera import CameraPose, Frame
from .errors import (
    ConfigError,
    DegenerateDataError,
    InputError,
    LidregError,
)
from .estimators import CoarseRegistrar, FineRegistrar, SuperResolver
from .pointcloud import PointCloud
from .raster import OpticalImage, RasterImage
from .superres import FistaConfig, SparseRaster
from .synth import SceneSpec, generate_scene

__version__ = "0.1.0"

__all__ = [
    "CameraPose",
    "Frame",
    "PointCloud",
    "OpticalImage",
    "RasterImage",
    "SparseRaster",
    "FistaConfig",
    "SceneSpec",
    "generate_scene",
    "CoarseRegistrar",
    "FineRegistrar",
    "SuperResolver",
    "LidregError",
    "ConfigError",
    "InputError",
    "DegenerateDataError",
    "__version__",
]
