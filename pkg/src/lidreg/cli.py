"""Command-line interface for the registration pipeline.

Subcommands map one-to-one onto the pipeline stages plus a synthetic scene
generator and an end-to-end driver.  Options come from flags and from an
optional ``key = value`` config file with dotted section prefixes
(``fista.lambda = 0.002``); flags win over the file.  Exit codes: 0 success,
2 configuration problems, 3 input/output problems, 4 degenerate data,
5 non-convergence (only with --require-convergence).
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .camera import Frame, read_pose, write_pose
from .errors import (
    ConfigError,
    DegenerateDataError,
    InputError,
    LidregError,
)
from .evalmetrics import (
    SegmentPair,
    centroid_discrepancy,
    checkerboard_overlay,
    discrepancy_gain,
    pair_line_report,
)
from .image_extract import SegmentationConfig, extract_image_segments
from .lidar_extract import ExtractionConfig, extract_building_regions, write_regions
from .matching import (
    MatchConfig,
    gtm_filter,
    initial_match,
    largest_segment_translation,
    mark_inliers,
    ransac_filter,
    validate_pairs,
    write_correspondences,
)
from .pointcloud import read_cloud, write_cloud
from .pose_estimate import Corr3D2D, gold_standard, reprojection_rmse
from .raster import (
    luma,
    pose_digest,
    read_image,
    write_float_grid,
    write_grid_preview,
    write_image,
)
from .simreg import (
    FineConfig,
    PoseField,
    gain_percent,
    optimize_patches,
    partition_patches,
    project_with_field,
    read_pose_field,
    render_registered,
    write_pose_field,
)
from .superres import FistaConfig, super_resolve
from .synth import SceneSpec, generate_scene, perturb_pose, true_pixels

log = logging.getLogger("lidreg")


class NonConvergence(LidregError):
    """Raised by the CLI when convergence was demanded but not reached."""


# --- config file -----------------------------------------------------------

def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_CONFIG_SCHEMA = {
    "seed": int,
    "scene.extent_x": float,
    "scene.extent_y": float,
    "scene.n_buildings": int,
    "scene.footprint_min": float,
    "scene.footprint_max": float,
    "scene.height_min": float,
    "scene.height_max": float,
    "scene.gable_fraction": float,
    "scene.tree_count": int,
    "scene.tree_radius": float,
    "scene.density": float,
    "scene.sigma_z": float,
    "scene.intensity_noise": float,
    "scene.image_noise": float,
    "scene.gsd": float,
    "scene.flying_height": float,
    "scene.road_width": float,
    "scene.target_pitch": float,
    "lidar.relief_factor": float,
    "lidar.grid_resolution": float,
    "lidar.min_segment_area": float,
    "lidar.opening_radius": int,
    "image.spatial_bandwidth": float,
    "image.range_bandwidth": float,
    "image.min_region": int,
    "image.min_area": float,
    "image.max_area": float,
    "image.min_filling": float,
    "match.gtm_k": int,
    "match.dominance_ratio": float,
    "match.area_tolerance": float,
    "match.direction_tolerance_deg": float,
    "match.ransac_threshold": float,
    "match.ransac_iterations": int,
    "match.method": str,
    "match.use_guide": _parse_bool,
    "fista.lambda": float,
    "fista.gamma": float,
    "fista.k_max": int,
    "fista.epsilon": float,
    "fine.objective": str,
    "fine.patch_width": int,
    "fine.patch_height": int,
    "fine.margin": float,
    "fine.bins": int,
    "fine.ncmi_bins": int,
    "fine.step_position": float,
    "fine.step_angle_deg": float,
    "fine.fatol": float,
    "fine.max_evals": int,
    "fine.inner_k_max": int,
    "fine.workers": int,
    "eval.tile": int,
}


def load_config(path) -> dict:
    """Parse a flat ``key = value`` file into typed values.

    Unknown keys and untypable values are configuration errors.
    """
    values: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_SCHEMA:
            raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_SCHEMA[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}: line {lineno}: bad value for {key}: {exc}") from exc
    return values


def _config_from_args(args) -> dict:
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def _scene_spec(cfg: dict) -> SceneSpec:
    spec = SceneSpec(seed=cfg.get("seed", 0))
    updates: dict = {}
    if "scene.extent_x" in cfg or "scene.extent_y" in cfg:
        updates["extent"] = (
            cfg.get("scene.extent_x", spec.extent[0]),
            cfg.get("scene.extent_y", spec.extent[1]),
        )
    if "scene.footprint_min" in cfg or "scene.footprint_max" in cfg:
        updates["footprint_range"] = (
            cfg.get("scene.footprint_min", spec.footprint_range[0]),
            cfg.get("scene.footprint_max", spec.footprint_range[1]),
        )
    if "scene.height_min" in cfg or "scene.height_max" in cfg:
        updates["height_range"] = (
            cfg.get("scene.height_min", spec.height_range[0]),
            cfg.get("scene.height_max", spec.height_range[1]),
        )
    for key, attr in (
        ("scene.n_buildings", "n_buildings"),
        ("scene.gable_fraction", "gable_fraction"),
        ("scene.tree_count", "tree_count"),
        ("scene.tree_radius", "tree_radius"),
        ("scene.density", "density"),
        ("scene.sigma_z", "sigma_z"),
        ("scene.intensity_noise", "intensity_noise"),
        ("scene.image_noise", "image_noise"),
        ("scene.gsd", "gsd"),
        ("scene.flying_height", "flying_height"),
        ("scene.road_width", "road_width"),
        ("scene.target_pitch", "target_pitch"),
    ):
        if key in cfg:
            updates[attr] = cfg[key]
    spec = replace(spec, **updates)
    spec.validate()  # raises InvalidSpec, a ConfigError
    return spec


def _extraction_config(cfg: dict) -> ExtractionConfig:
    config = ExtractionConfig(
        relief_factor=cfg.get("lidar.relief_factor", 2.5),
        grid_resolution=cfg.get("lidar.grid_resolution", 1.5),
        min_segment_area=cfg.get("lidar.min_segment_area", 10.0),
        opening_radius=cfg.get("lidar.opening_radius", 1),
    )
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def _segmentation_config(cfg: dict) -> SegmentationConfig:
    config = SegmentationConfig(
        spatial_bandwidth=cfg.get("image.spatial_bandwidth", 8.0),
        range_bandwidth=cfg.get("image.range_bandwidth", 8.0),
        min_region=cfg.get("image.min_region", 50),
        min_area=cfg.get("image.min_area", 20.0),
        max_area=cfg.get("image.max_area", 2000.0),
        min_filling=cfg.get("image.min_filling", 50.0),
    )
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def _match_config(cfg: dict) -> MatchConfig:
    return MatchConfig(
        gtm_k=cfg.get("match.gtm_k", 4),
        dominance_ratio=cfg.get("match.dominance_ratio", 1.2),
        area_tolerance=cfg.get("match.area_tolerance", 0.15),
        direction_tolerance=math.radians(cfg.get("match.direction_tolerance_deg", 2.0)),
        ransac_threshold=cfg.get("match.ransac_threshold", 3.0),
        ransac_iterations=cfg.get("match.ransac_iterations", 500),
    )


def _fista_config(cfg: dict) -> FistaConfig:
    config = FistaConfig(
        lam=cfg.get("fista.lambda", 1e-3),
        gamma=cfg.get("fista.gamma", 1.0 / 16.0),
        k_max=cfg.get("fista.k_max", 1000),
        epsilon=cfg.get("fista.epsilon", 1e-4),
    )
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def _fine_config(cfg: dict, args) -> FineConfig:
    objective = cfg.get("fine.objective", "mi")
    if getattr(args, "objective", None):
        objective = args.objective
    patch_width = cfg.get("fine.patch_width", 500)
    patch_height = cfg.get("fine.patch_height", 550)
    if getattr(args, "patch", None):
        patch_width, patch_height = _parse_patch(args.patch)
    workers = cfg.get("fine.workers", 1)
    if getattr(args, "threads", None) is not None:
        workers = args.threads
    config = FineConfig(
        objective=objective,
        patch_width=patch_width,
        patch_height=patch_height,
        margin=cfg.get("fine.margin", 50.0),
        bins=cfg.get("fine.bins", 64),
        ncmi_bins=cfg.get("fine.ncmi_bins", 32),
        step_position=cfg.get("fine.step_position", 1.0),
        step_angle=math.radians(cfg.get("fine.step_angle_deg", 0.2)),
        fatol=cfg.get("fine.fatol", 1e-5),
        max_evals=cfg.get("fine.max_evals", 200),
        inner_k_max=cfg.get("fine.inner_k_max", 60),
        workers=workers,
    )
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def _parse_patch(text: str):
    try:
        w, h = text.lower().split("x")
        width, height = int(w), int(h)
    except ValueError as exc:
        raise ConfigError(f"--patch expects WIDTHxHEIGHT, got {text!r}") from exc
    if width < 1 or height < 1:
        raise ConfigError("--patch dimensions must be positive")
    return width, height


def _parse_frame(text: str) -> Frame:
    try:
        r, c = text.lower().split("x")
        return Frame(int(r), int(c))
    except ValueError as exc:
        raise ConfigError(f"--frame expects ROWSxCOLS, got {text!r}") from exc


def _out_dir(args) -> str:
    path = args.out
    os.makedirs(path, exist_ok=True)
    return path


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="ascii", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value: float) -> str:
    return repr(float(value))


# --- subcommands -----------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _config_from_args(args)
    spec = _scene_spec(cfg)
    out = _out_dir(args)
    cloud, image, truth = generate_scene(spec)
    cloud_path = os.path.join(out, "cloud.bin" if args.binary_cloud else "cloud.txt")
    write_cloud(cloud_path, cloud)
    write_image(os.path.join(out, "image.png"), image)
    write_pose(os.path.join(out, "pose_true.txt"), truth.pose)
    write_pose(os.path.join(out, "pose_nominal.txt"), truth.nominal_pose)
    if args.perturb_translation or args.perturb_rotation:
        init = perturb_pose(
            truth.pose,
            args.perturb_translation,
            math.radians(args.perturb_rotation),
            seed=cfg.get("seed", 0) + 1,
        )
        write_pose(os.path.join(out, "pose_init.txt"), init)

    points = truth.checkpoints()
    pix = true_pixels(truth, points)
    _write_csv(
        os.path.join(out, "checkpoints.csv"),
        ["id", "x", "y", "z", "px", "py"],
        [
            [i, _fmt(p[0]), _fmt(p[1]), _fmt(p[2]), _fmt(q[0]), _fmt(q[1])]
            for i, (p, q) in enumerate(zip(points, pix))
        ],
    )
    segments = truth.boundary_segments()
    seg_px = true_pixels(truth, segments.reshape(-1, 3)).reshape(-1, 2, 2)
    _write_csv(
        os.path.join(out, "pairlines.csv"),
        ["id", "ax", "ay", "az", "bx", "by", "bz", "pax", "pay", "pbx", "pby"],
        [
            [i] + [_fmt(v) for v in seg.ravel()] + [_fmt(v) for v in px.ravel()]
            for i, (seg, px) in enumerate(zip(segments, seg_px))
        ],
    )
    log.info("scene written to %s: %d points, %d buildings",
             out, len(cloud), len(truth.buildings))
    print(f"synth: {len(cloud)} points, {len(truth.buildings)} buildings, "
          f"image {image.n_rows}x{image.n_cols} -> {out}")
    return 0


def cmd_extract_lidar(args) -> int:
    cfg = _config_from_args(args)
    config = _extraction_config(cfg)
    cloud = read_cloud(args.cloud)
    regions = extract_building_regions(cloud, config)
    out = _out_dir(args)
    write_regions(os.path.join(out, "regions.txt"), regions)
    _write_csv(
        os.path.join(out, "region_report.csv"),
        ["id", "centroid_x", "centroid_y", "mean_z", "area_m2", "direction_rad", "n_points"],
        [
            [r.ident, _fmt(r.centroid[0]), _fmt(r.centroid[1]), _fmt(r.mean_z),
             _fmt(r.area), _fmt(r.direction), int(r.point_index.size)]
            for r in regions
        ],
    )
    print(f"extract-lidar: {len(regions)} building regions -> {out}")
    return 0


def cmd_extract_image(args) -> int:
    cfg = _config_from_args(args)
    config = _segmentation_config(cfg)
    image = read_image(args.image)
    segments, labels = extract_image_segments(image, config)
    out = _out_dir(args)
    _write_csv(
        os.path.join(out, "segments.csv"),
        ["id", "pixel_count", "centroid_x_px", "centroid_y_px",
         "area_m2", "direction_rad", "filling_pct"],
        [
            [s.ident, s.pixel_count, _fmt(s.centroid_px[0]), _fmt(s.centroid_px[1]),
             _fmt(s.area), _fmt(s.direction), _fmt(s.filling)]
            for s in segments
        ],
    )
    write_grid_preview(os.path.join(out, "labels.png"), labels.astype(np.float64))
    print(f"extract-image: {len(segments)} candidate segments "
          f"(of {int(labels.max()) + 1} raw) -> {out}")
    return 0


def _run_matching(cloud, image, cfg, args):
    """Shared by match/coarse/pipeline: returns (regions, segments, all, kept)."""
    extraction = _extraction_config(cfg)
    segmentation = _segmentation_config(cfg)
    match_config = _match_config(cfg)
    method = cfg.get("match.method", "gtm")
    if getattr(args, "method", None):
        method = args.method
    use_guide = cfg.get("match.use_guide", True)
    if getattr(args, "no_guide", False):
        use_guide = False
    seed = cfg.get("seed", 0)

    regions = extract_building_regions(cloud, extraction)
    segments, _ = extract_image_segments(image, segmentation)
    log.info("matching %d regions against %d segments", len(regions), len(segments))

    translation = None
    if use_guide:
        try:
            translation = largest_segment_translation(
                regions, segments, image, match_config.dominance_ratio
            )
        except DegenerateDataError as exc:
            log.warning("translation guide unavailable: %s", exc)
    raw = initial_match(regions, segments, image, translation)
    if method == "gtm":
        filtered = gtm_filter(raw, k=match_config.gtm_k)
    elif method == "ransac":
        filtered = ransac_filter(raw, match_config.ransac_threshold,
                                 match_config.ransac_iterations, seed)
    elif method == "none":
        filtered = list(raw)
    else:
        raise ConfigError(f"unknown match method {method!r}")
    regions_by_id = {r.ident: r for r in regions}
    segments_by_id = {s.ident: s for s in segments}
    kept = validate_pairs(filtered, regions_by_id, segments_by_id, match_config)
    return regions, segments, mark_inliers(raw, kept), kept


def cmd_match(args) -> int:
    cfg = _config_from_args(args)
    cloud = read_cloud(args.cloud)
    image = read_image(args.image)
    regions, segments, flagged, kept = _run_matching(cloud, image, cfg, args)
    out = _out_dir(args)
    write_correspondences(os.path.join(out, "correspondences.txt"), flagged)
    print(f"match: {len(kept)} validated pairs of {len(flagged)} candidates -> {out}")
    return 0


def cmd_coarse(args) -> int:
    cfg = _config_from_args(args)
    cloud = read_cloud(args.cloud)
    image = read_image(args.image)
    regions, segments, flagged, kept = _run_matching(cloud, image, cfg, args)
    out = _out_dir(args)
    write_correspondences(os.path.join(out, "correspondences.txt"), flagged)

    regions_by_id = {r.ident: r for r in regions}
    corrs = [
        Corr3D2D(world=regions_by_id[m.lidar_id].centroid3, pixel=m.image_px)
        for m in kept
    ]
    pose = gold_standard(corrs)
    rmse = reprojection_rmse(pose, corrs)
    write_pose(os.path.join(out, "theta_global.txt"), pose)
    _write_csv(
        os.path.join(out, "coarse_report.csv"),
        ["n_regions", "n_segments", "n_candidates", "n_validated", "rmse_px"],
        [[len(regions), len(segments), len(flagged), len(kept), _fmt(rmse)]],
    )
    print(f"coarse: pose from {len(kept)} pairs, reprojection rmse {rmse:.3f} px -> {out}")
    return 0


def cmd_superres(args) -> int:
    cfg = _config_from_args(args)
    fista = _fista_config(cfg)
    cloud = read_cloud(args.cloud)
    pose = read_pose(args.pose)
    if args.frame:
        frame = _parse_frame(args.frame)
    elif args.image:
        image = read_image(args.image)
        frame = Frame(image.n_rows, image.n_cols)
    else:
        raise ConfigError("superres needs --image or --frame for the output size")
    raster, info = super_resolve(cloud, pose, frame, fista, channel=args.channel)
    out = _out_dir(args)
    stem = f"sr_{args.channel}"
    write_float_grid(os.path.join(out, stem + ".f32"), raster,
                     channel=args.channel, pose_hash=pose_digest(pose))
    write_grid_preview(os.path.join(out, stem + ".png"), raster)
    _write_csv(
        os.path.join(out, "superres_report.csv"),
        ["channel", "converged", "iterations", "final_change", "n_transferred"],
        [[args.channel, int(info["converged"]), info["iterations"],
          _fmt(info["final_change"]), info["n_transferred"]]],
    )
    print(f"superres: {stem} {'converged' if info['converged'] else 'NOT converged'} "
          f"after {info['iterations']} iterations -> {out}")
    if args.require_convergence and not info["converged"]:
        raise NonConvergence(f"propagation stopped at {info['iterations']} iterations")
    return 0


def cmd_fine(args) -> int:
    cfg = _config_from_args(args)
    fista = _fista_config(cfg)
    fine = _fine_config(cfg, args)
    cloud = read_cloud(args.cloud)
    image = read_image(args.image)
    pose = read_pose(args.pose)
    frame = Frame(image.n_rows, image.n_cols)
    luma_img = luma(image.rgb)
    grid = partition_patches(frame, cloud, pose,
                             fine.patch_width, fine.patch_height, fine.margin)
    log.info("fine: %dx%d patches, objective %s, %d workers",
             grid.n_prows, grid.n_pcols, fine.objective, fine.workers)
    results = optimize_patches(cloud, luma_img, grid, pose, fine, fista)
    field = PoseField(grid=grid, pose_init=pose, results=results)
    out = _out_dir(args)
    write_pose_field(os.path.join(out, "pose_field.csv"), field)

    raster, info = render_registered(cloud, field, frame, channel="i", fista=fista)
    write_float_grid(os.path.join(out, "registered_i.f32"), raster,
                     channel="i", pose_hash=pose_digest(pose))
    write_grid_preview(os.path.join(out, "registered_i.png"), raster)
    _write_csv(
        os.path.join(out, "fine_report.csv"),
        ["pr", "pc", "n_points", "init_value", "value", "gain_pct", "n_evals",
         "fallback"],
        [
            [r.pr, r.pc, r.n_points, _fmt(r.init_value), _fmt(r.value),
             _fmt(gain_percent(r.init_value, r.value)), r.n_evals, int(r.fallback)]
            for r in results
        ],
    )
    improved = sum(1 for r in results if not r.fallback and r.value > r.init_value)
    print(f"fine: {fine.objective} improved {improved}/{len(results)} patches, "
          f"{info['double_projection_pixels']} double-projection conflicts -> {out}")
    if args.require_convergence and not info["converged"]:
        raise NonConvergence("final rendering did not converge")
    return 0


def _read_checkpoints(path):
    rows = []
    with open(path, "r", encoding="ascii", newline="") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            rows.append(
                (
                    int(row["id"]),
                    np.array([float(row["x"]), float(row["y"]), float(row["z"])]),
                    np.array([float(row["px"]), float(row["py"])]),
                )
            )
    if not rows:
        raise InputError(f"{path}: no check points")
    return rows


def _read_pairlines(path):
    rows = []
    with open(path, "r", encoding="ascii", newline="") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            world = np.array(
                [
                    [float(row["ax"]), float(row["ay"]), float(row["az"])],
                    [float(row["bx"]), float(row["by"]), float(row["bz"])],
                ]
            )
            pix = np.array(
                [
                    [float(row["pax"]), float(row["pay"])],
                    [float(row["pbx"]), float(row["pby"])],
                ]
            )
            rows.append((int(row["id"]), world, pix))
    if not rows:
        raise InputError(f"{path}: no check pair lines")
    return rows


def _load_pose_source(args):
    """Either a fitted pose file or a pose-field CSV; returns a projector."""
    if getattr(args, "field", None):
        field = read_pose_field(args.field)
        return field, lambda pts: project_with_field(field, pts)[0]
    if getattr(args, "pose", None):
        pose = read_pose(args.pose)
        from .camera import build_camera_matrix, project_points

        matrix = build_camera_matrix(pose)
        return None, lambda pts: project_points(matrix, pts)[0]
    raise ConfigError("eval needs --pose or --field")


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    image = read_image(args.image)
    checkpoints = _read_checkpoints(os.path.join(args.truth, "checkpoints.csv"))
    pairlines = _read_pairlines(os.path.join(args.truth, "pairlines.csv"))
    field, projector = _load_pose_source(args)
    gsd = image.gsd
    out = _out_dir(args)

    world = np.stack([w for _, w, _ in checkpoints])
    true_px = np.stack([q for _, _, q in checkpoints])
    before_px = image.world_to_pixel(world[:, :2])
    after_px = projector(world)
    before = centroid_discrepancy(before_px, true_px, scale=gsd)
    after = centroid_discrepancy(after_px, true_px, scale=gsd)
    gain = discrepancy_gain(before[0], after[0])
    rows = []
    for i, (ident, _, q) in enumerate(checkpoints):
        d_before = float(np.linalg.norm(before_px[i] - q) * gsd)
        d_after = float(np.linalg.norm(after_px[i] - q) * gsd)
        rows.append([ident, _fmt(d_before), _fmt(d_after)])
    _write_csv(os.path.join(out, "checkpoint_report.csv"),
               ["id", "before_m", "after_m"], rows)
    _write_csv(
        os.path.join(out, "checkpoint_summary.csv"),
        ["before_mean_m", "before_std_m", "after_mean_m", "after_std_m", "gain_pct"],
        [[_fmt(before[0]), _fmt(before[1]), _fmt(after[0]), _fmt(after[1]), _fmt(gain)]],
    )

    pairs_before = []
    pairs_after = []
    for _, seg_world, seg_px in pairlines:
        endpoints = seg_world.reshape(-1, 3)
        pairs_before.append(
            SegmentPair(projected=image.world_to_pixel(endpoints[:, :2]), reference=seg_px)
        )
        pairs_after.append(SegmentPair(projected=projector(endpoints), reference=seg_px))
    rows_b, summary_b = pair_line_report(pairs_before, scale=gsd)
    rows_a, summary_a = pair_line_report(pairs_after, scale=gsd)
    _write_csv(
        os.path.join(out, "pairline_report.csv"),
        ["id", "before_line_m", "after_line_m", "before_hausdorff_m", "after_hausdorff_m"],
        [
            [pairlines[i][0], _fmt(rb[1]), _fmt(ra[1]), _fmt(rb[2]), _fmt(ra[2])]
            for i, (rb, ra) in enumerate(zip(rows_b, rows_a))
        ],
    )
    _write_csv(
        os.path.join(out, "pairline_summary.csv"),
        ["metric", "before_mean_m", "before_std_m", "after_mean_m", "after_std_m"],
        [
            ["line", _fmt(summary_b["line"][0]), _fmt(summary_b["line"][1]),
             _fmt(summary_a["line"][0]), _fmt(summary_a["line"][1])],
            ["hausdorff", _fmt(summary_b["hausdorff"][0]), _fmt(summary_b["hausdorff"][1]),
             _fmt(summary_a["hausdorff"][0]), _fmt(summary_a["hausdorff"][1])],
        ],
    )

    if args.overlay:
        if args.cloud is None:
            raise ConfigError("--overlay needs --cloud to render the registered raster")
        cloud = read_cloud(args.cloud)
        fista = _fista_config(cfg)
        frame = Frame(image.n_rows, image.n_cols)
        if field is not None:
            raster, _ = render_registered(cloud, field, frame, channel="i", fista=fista)
        else:
            pose = read_pose(args.pose)
            raster, _ = super_resolve(cloud, pose, frame, fista, channel="i")
        overlay = checkerboard_overlay(luma(image.rgb), raster,
                                       tile=cfg.get("eval.tile", 64))
        from PIL import Image as PILImage

        PILImage.fromarray(overlay, mode="L").save(os.path.join(out, "overlay.png"))

    print(
        "eval: check points before "
        f"{before[0]:.3f}±{before[1]:.3f} m, after {after[0]:.3f}±{after[1]:.3f} m "
        f"(gain {gain:.1f}%); pair lines after {summary_a['line'][0]:.3f} m line / "
        f"{summary_a['hausdorff'][0]:.3f} m hausdorff -> {out}"
    )
    return 0


def cmd_pipeline(args) -> int:
    cfg = _config_from_args(args)
    out = _out_dir(args)
    cloud = read_cloud(args.cloud)
    image = read_image(args.image)

    if args.pose:
        pose = read_pose(args.pose)
        regions = segments = flagged = kept = None
    else:
        regions, segments, flagged, kept = _run_matching(cloud, image, cfg, args)
        write_correspondences(os.path.join(out, "correspondences.txt"), flagged)
        regions_by_id = {r.ident: r for r in regions}
        corrs = [
            Corr3D2D(world=regions_by_id[m.lidar_id].centroid3, pixel=m.image_px)
            for m in kept
        ]
        pose = gold_standard(corrs)
        write_pose(os.path.join(out, "theta_global.txt"), pose)
        log.info("pipeline: coarse pose from %d pairs", len(kept))

    fista = _fista_config(cfg)
    fine = _fine_config(cfg, args)
    frame = Frame(image.n_rows, image.n_cols)
    luma_img = luma(image.rgb)
    grid = partition_patches(frame, cloud, pose,
                             fine.patch_width, fine.patch_height, fine.margin)
    results = optimize_patches(cloud, luma_img, grid, pose, fine, fista)
    field = PoseField(grid=grid, pose_init=pose, results=results)
    write_pose_field(os.path.join(out, "pose_field.csv"), field)
    raster, info = render_registered(cloud, field, frame, channel="i", fista=fista)
    write_float_grid(os.path.join(out, "registered_i.f32"), raster,
                     channel="i", pose_hash=pose_digest(pose))
    write_grid_preview(os.path.join(out, "registered_i.png"), raster)

    if args.truth:
        eval_args = argparse.Namespace(
            config=getattr(args, "config", None),
            seed=getattr(args, "seed", None),
            image=args.image,
            truth=args.truth,
            pose=None,
            field=os.path.join(out, "pose_field.csv"),
            cloud=args.cloud,
            overlay=True,
            out=out,
        )
        cmd_eval(eval_args)
    print(f"pipeline: done -> {out}")
    if args.require_convergence and not info["converged"]:
        raise NonConvergence("final rendering did not converge")
    return 0


# --- parser ----------------------------------------------------------------

def _add_common(sub, *, config=True, seed=True, out=True):
    if config:
        sub.add_argument("--config", help="key = value configuration file")
    if seed:
        sub.add_argument("--seed", type=int, default=None, help="random seed override")
    if out:
        sub.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lidreg",
        description="LiDAR-to-optical-image registration pipeline",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("synth", help="generate a synthetic scene")
    _add_common(p)
    p.add_argument("--perturb-translation", type=float, default=0.0,
                   help="offset norm of the true projection center, m")
    p.add_argument("--perturb-rotation", type=float, default=0.0,
                   help="offset norm of the true angles, degrees")
    p.add_argument("--binary-cloud", action="store_true",
                   help="write cloud.bin instead of cloud.txt")
    p.set_defaults(func=cmd_synth)

    p = commands.add_parser("extract-lidar", help="building regions from a cloud")
    p.add_argument("--cloud", required=True)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_extract_lidar)

    p = commands.add_parser("extract-image", help="candidate segments from an image")
    p.add_argument("--image", required=True)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_extract_image)

    p = commands.add_parser("match", help="pair regions with segments")
    p.add_argument("--cloud", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--method", choices=["gtm", "ransac", "none"], default=None)
    p.add_argument("--no-guide", action="store_true",
                   help="skip the largest-segment translation guide")
    _add_common(p)
    p.set_defaults(func=cmd_match)

    p = commands.add_parser("coarse", help="match and resect the global pose")
    p.add_argument("--cloud", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--method", choices=["gtm", "ransac", "none"], default=None)
    p.add_argument("--no-guide", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_coarse)

    p = commands.add_parser("superres", help="render a resolved raster channel")
    p.add_argument("--cloud", required=True)
    p.add_argument("--pose", required=True)
    p.add_argument("--image", help="image whose frame to render into")
    p.add_argument("--frame", help="ROWSxCOLS when no image is given")
    p.add_argument("--channel", choices=["z", "i"], default="z")
    p.add_argument("--require-convergence", action="store_true")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_superres)

    p = commands.add_parser("fine", help="patch-wise pose refinement")
    p.add_argument("--cloud", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--pose", required=True, help="initial global pose file")
    p.add_argument("--objective", choices=["mi", "ncmi"], default=None)
    p.add_argument("--patch", help="patch size WIDTHxHEIGHT in px")
    p.add_argument("--threads", type=int, default=None, help="worker processes")
    p.add_argument("--require-convergence", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_fine)

    p = commands.add_parser("eval", help="check-point and pair-line metrics")
    p.add_argument("--truth", required=True, help="directory with synth ground truth")
    p.add_argument("--image", required=True)
    p.add_argument("--pose", help="global pose file to evaluate")
    p.add_argument("--field", help="pose field CSV to evaluate")
    p.add_argument("--cloud", help="cloud for the checkerboard overlay")
    p.add_argument("--overlay", action="store_true", help="write overlay.png")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = commands.add_parser("pipeline", help="coarse + fine + optional eval")
    p.add_argument("--cloud", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--pose", help="skip coarse and start from this pose")
    p.add_argument("--truth", help="ground-truth directory enables eval")
    p.add_argument("--objective", choices=["mi", "ncmi"], default=None)
    p.add_argument("--patch", help="patch size WIDTHxHEIGHT in px")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--method", choices=["gtm", "ransac", "none"], default=None)
    p.add_argument("--no-guide", action="store_true")
    p.add_argument("--require-convergence", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_pipeline)

    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("REGISTRAR_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        stream=sys.stderr,
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NonConvergence as exc:
        log.error("did not converge: %s", exc)
        return 5
    except ConfigError as exc:
        log.error("configuration: %s", exc)
        return 2
    except (InputError, OSError) as exc:
        log.error("input/output: %s", exc)
        return 3
    except DegenerateDataError as exc:
        log.error("degenerate data: %s", exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
