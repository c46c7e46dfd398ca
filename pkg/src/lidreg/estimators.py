"""Estimator-style front ends for the registration pipeline.

These wrap the functional modules in the familiar fit/predict/transform
pattern: construct with hyperparameters, fit against data, read fitted
state from trailing-underscore attributes.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator

from . import image_extract, lidar_extract, matching, pose_estimate, simreg, superres
from ._validation import check_cloud, check_fitted, check_image, check_pose
from .camera import Frame, build_camera_matrix, project_points
from .raster import luma


class SuperResolver(BaseEstimator):
    """Fills the gaps of sparsely transferred rasters by proximal descent.

    Parameters mirror the propagation configuration; ``fit`` freezes them
    into a validated config, ``transform`` fills a sparse raster, and
    ``resolve`` runs the full transfer-and-fill chain for a cloud and pose.
    """

    def __init__(self, lam: float = 1e-3, gamma: float = 1.0 / 16.0,
                 k_max: int = 1000, epsilon: float = 1e-4):
        self.lam = lam
        self.gamma = gamma
        self.k_max = k_max
        self.epsilon = epsilon

    def _config(self) -> superres.FistaConfig:
        config = superres.FistaConfig(
            lam=self.lam, gamma=self.gamma, k_max=self.k_max, epsilon=self.epsilon
        )
        config.validate()
        return config

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        return self

    def transform(self, X: superres.SparseRaster, channel: str = "z") -> np.ndarray:
        check_fitted(self, ["config_"])
        raster, info = superres.resolve_sparse(X, self.config_, channel)
        self.info_ = info
        return raster

    def resolve(self, cloud, pose, frame: Frame, channel: str = "z", origin=(0.0, 0.0)):
        check_fitted(self, ["config_"])
        raster, info = superres.super_resolve(
            check_cloud(cloud), check_pose(pose), frame, self.config_, channel, origin
        )
        self.info_ = info
        return raster


class CoarseRegistrar(BaseEstimator):
    """Building-primitive coarse alignment of a cloud to an ortho image.

    ``fit(cloud, image)`` extracts building regions from the cloud and
    candidate segments from the image, matches and filters their centroids,
    and resects a full camera pose from the surviving pairs.  ``predict``
    projects world points with the fitted pose.
    """

    def __init__(self, relief_factor: float = 2.5, grid_resolution: float = 1.5,
                 min_segment_area: float = 10.0, opening_radius: int = 1,
                 spatial_bandwidth: float = 8.0, range_bandwidth: float = 8.0,
                 min_region: int = 50, min_area: float = 20.0,
                 max_area: float = 2000.0, min_filling: float = 50.0,
                 gtm_k: int = 4, dominance_ratio: float = 1.2,
                 area_tolerance: float = 0.15, direction_tolerance_deg: float = 2.0,
                 filter_method: str = "gtm", use_guide: bool = True, seed: int = 0):
        self.relief_factor = relief_factor
        self.grid_resolution = grid_resolution
        self.min_segment_area = min_segment_area
        self.opening_radius = opening_radius
        self.spatial_bandwidth = spatial_bandwidth
        self.range_bandwidth = range_bandwidth
        self.min_region = min_region
        self.min_area = min_area
        self.max_area = max_area
        self.min_filling = min_filling
        self.gtm_k = gtm_k
        self.dominance_ratio = dominance_ratio
        self.area_tolerance = area_tolerance
        self.direction_tolerance_deg = direction_tolerance_deg
        self.filter_method = filter_method
        self.use_guide = use_guide
        self.seed = seed

    def fit(self, X, y=None):
        """X is ``(cloud, image)``; y is ignored."""
        cloud, image = X
        cloud = check_cloud(cloud)
        image = check_image(image)

        extraction = lidar_extract.ExtractionConfig(
            relief_factor=self.relief_factor,
            grid_resolution=self.grid_resolution,
            min_segment_area=self.min_segment_area,
            opening_radius=self.opening_radius,
        )
        segmentation = image_extract.SegmentationConfig(
            spatial_bandwidth=self.spatial_bandwidth,
            range_bandwidth=self.range_bandwidth,
            min_region=self.min_region,
            min_area=self.min_area,
            max_area=self.max_area,
            min_filling=self.min_filling,
        )
        match_config = matching.MatchConfig(
            gtm_k=self.gtm_k,
            dominance_ratio=self.dominance_ratio,
            area_tolerance=self.area_tolerance,
            direction_tolerance=math.radians(self.direction_tolerance_deg),
        )

        self.regions_ = lidar_extract.extract_building_regions(cloud, extraction)
        self.segments_, _ = image_extract.extract_image_segments(image, segmentation)
        self.matches_ = matching.match_regions(
            self.regions_, self.segments_, image, match_config,
            use_guide=self.use_guide, method=self.filter_method, seed=self.seed,
        )
        regions_by_id = {r.ident: r for r in self.regions_}
        corrs = [
            pose_estimate.Corr3D2D(
                world=regions_by_id[m.lidar_id].centroid3, pixel=m.image_px
            )
            for m in self.matches_
        ]
        self.pose_ = pose_estimate.gold_standard(corrs)
        self.rmse_ = pose_estimate.reprojection_rmse(self.pose_, corrs)
        return self

    def predict(self, X) -> np.ndarray:
        """Project (n, 3) world points to pixels with the fitted pose."""
        check_fitted(self, ["pose_"])
        pixels, _, _ = project_points(
            build_camera_matrix(self.pose_), np.asarray(X, dtype=np.float64)
        )
        return pixels


class FineRegistrar(BaseEstimator):
    """Patch-wise similarity refinement of a global camera pose.

    ``fit((cloud, image), pose)`` tiles the image, optimizes the external
    parameters per patch by mutual information (or its normalized combined
    variant), and stores the blended pose field.  ``predict`` projects world
    points with per-point blended poses; ``transform`` renders a registered
    raster channel.
    """

    def __init__(self, objective: str = "mi", patch_width: int = 500,
                 patch_height: int = 550, margin: float = 50.0, bins: int = 64,
                 ncmi_bins: int = 32, step_position: float = 1.0,
                 step_angle_deg: float = 0.2, fatol: float = 1e-5,
                 max_evals: int = 200, inner_k_max: int = 60, workers: int = 1,
                 lam: float = 1e-3, gamma: float = 1.0 / 16.0,
                 k_max: int = 1000, epsilon: float = 1e-4):
        self.objective = objective
        self.patch_width = patch_width
        self.patch_height = patch_height
        self.margin = margin
        self.bins = bins
        self.ncmi_bins = ncmi_bins
        self.step_position = step_position
        self.step_angle_deg = step_angle_deg
        self.fatol = fatol
        self.max_evals = max_evals
        self.inner_k_max = inner_k_max
        self.workers = workers
        self.lam = lam
        self.gamma = gamma
        self.k_max = k_max
        self.epsilon = epsilon

    def _configs(self):
        fine = simreg.FineConfig(
            objective=self.objective,
            patch_width=self.patch_width,
            patch_height=self.patch_height,
            margin=self.margin,
            bins=self.bins,
            ncmi_bins=self.ncmi_bins,
            step_position=self.step_position,
            step_angle=math.radians(self.step_angle_deg),
            fatol=self.fatol,
            max_evals=self.max_evals,
            inner_k_max=self.inner_k_max,
            workers=self.workers,
        )
        fine.validate()
        fista = superres.FistaConfig(
            lam=self.lam, gamma=self.gamma, k_max=self.k_max, epsilon=self.epsilon
        )
        fista.validate()
        return fine, fista

    def fit(self, X, y):
        """X is ``(cloud, image)``; y is the initial global CameraPose."""
        cloud, image = X
        cloud = check_cloud(cloud)
        image = check_image(image)
        pose = check_pose(y)
        fine, fista = self._configs()
        frame = Frame(image.rgb.shape[0], image.rgb.shape[1])
        luma_img = luma(image.rgb)
        grid = simreg.partition_patches(
            frame, cloud, pose, fine.patch_width, fine.patch_height, fine.margin
        )
        results = simreg.optimize_patches(cloud, luma_img, grid, pose, fine, fista)
        self.frame_ = frame
        self.field_ = simreg.PoseField(grid=grid, pose_init=pose, results=results)
        self.results_ = results
        return self

    def predict(self, X) -> np.ndarray:
        """Project (n, 3) world points with per-point blended poses."""
        check_fitted(self, ["field_"])
        pixels, _, _ = simreg.project_with_field(self.field_, np.asarray(X, dtype=float))
        return pixels

    def transform(self, X, channel: str = "i") -> np.ndarray:
        """Render a registered raster channel for a cloud."""
        check_fitted(self, ["field_"])
        _, fista = self._configs()
        raster, info = simreg.render_registered(
            check_cloud(X), self.field_, self.frame_, channel, fista
        )
        self.info_ = info
        return raster
