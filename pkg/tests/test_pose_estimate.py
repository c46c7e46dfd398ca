"""Tests for camera resection from 3-D/2-D correspondences."""

import math

import numpy as np
import pytest

from lidreg.camera import CameraPose, build_camera_matrix, project_points
from lidreg.errors import DegenerateConfiguration, TooFewCorrespondences
from lidreg.pose_estimate import Corr3D2D, gold_standard, reprojection_rmse

# A deliberately strong resection geometry: wide field of view (half-angle
# ~40 deg) and deep relief (up to half the camera height).  A narrow-field
# nadir setup leaves focal length and camera distance nearly inseparable, and
# 1 px of noise then moves the recovered center by hundreds of meters.
TRUE_POSE = CameraPose(
    alpha_x=3000.0,
    alpha_y=3000.0,
    skew=0.0,
    p_x=750.0,
    p_y=825.0,
    x0=500.0,
    y0=500.0,
    z0=600.0,
    omega=math.pi + 0.004,
    phi=-0.003,
    kappa=0.02,
)


def synthetic_correspondences(n=12, seed=1, noise=0.0, pose=TRUE_POSE):
    rng = np.random.default_rng(seed)
    world = np.column_stack(
        [
            rng.uniform(20.0, 980.0, n),
            rng.uniform(20.0, 980.0, n),
            rng.uniform(0.0, 300.0, n),
        ]
    )
    pixels, _, valid = project_points(build_camera_matrix(pose), world)
    assert np.all(valid)
    pixels = pixels + rng.normal(0.0, noise, pixels.shape) if noise else pixels
    return [Corr3D2D(world=w, pixel=p) for w, p in zip(world, pixels)]


def camera_center(pose: CameraPose) -> np.ndarray:
    return np.array([pose.x0, pose.y0, pose.z0])


# --- gold standard ----------------------------------------------------------

def test_exact_round_trip_recovers_pose():
    corr = synthetic_correspondences(n=12, seed=1)
    estimate = gold_standard(corr)
    assert reprojection_rmse(estimate, corr) < 1e-6
    assert np.allclose(camera_center(estimate), camera_center(TRUE_POSE), atol=1e-4)


def test_noisy_monte_carlo_center_accuracy():
    """sigma = 1 px noise: RMSE <= 2 px and center within 1% of flying height."""
    for seed in range(100):
        corr = synthetic_correspondences(n=12, seed=seed + 1000, noise=1.0)
        estimate = gold_standard(corr)
        assert reprojection_rmse(estimate, corr) <= 2.0, seed
        err = np.linalg.norm(camera_center(estimate) - camera_center(TRUE_POSE))
        assert err <= 0.01 * TRUE_POSE.z0, (seed, err)


def test_coplanar_points_raise():
    rng = np.random.default_rng(3)
    world = np.column_stack(
        [rng.uniform(0, 200, 8), rng.uniform(0, 200, 8), np.full(8, 5.0)]
    )
    pixels, _, _ = project_points(build_camera_matrix(TRUE_POSE), world)
    corr = [Corr3D2D(world=w, pixel=p) for w, p in zip(world, pixels)]
    with pytest.raises(DegenerateConfiguration):
        gold_standard(corr)


def test_collinear_points_raise():
    t = np.linspace(0.0, 1.0, 8)
    world = np.outer(t, [100.0, 80.0, 20.0]) + [30.0, 40.0, 2.0]
    pixels, _, _ = project_points(build_camera_matrix(TRUE_POSE), world)
    corr = [Corr3D2D(world=w, pixel=p) for w, p in zip(world, pixels)]
    with pytest.raises(DegenerateConfiguration):
        gold_standard(corr)


def test_too_few_correspondences():
    corr = synthetic_correspondences(n=5, seed=2)
    with pytest.raises(TooFewCorrespondences):
        gold_standard(corr)


def test_minimum_count_is_six():
    corr = synthetic_correspondences(n=6, seed=4)
    estimate = gold_standard(corr)
    assert reprojection_rmse(estimate, corr) < 1e-6


def test_refinement_never_beats_linear_solution_backwards():
    """The refined fit is at least as good as the linear-only estimate."""
    corr = synthetic_correspondences(n=12, seed=7, noise=1.5)
    linear_only = gold_standard(corr, max_iterations=0)
    refined = gold_standard(corr)
    assert reprojection_rmse(refined, corr) <= reprojection_rmse(linear_only, corr) + 1e-12


def test_permutation_invariance():
    corr = synthetic_correspondences(n=12, seed=5, noise=0.8)
    rng = np.random.default_rng(8)
    shuffled = [corr[i] for i in rng.permutation(len(corr))]
    a = gold_standard(corr)
    b = gold_standard(shuffled)
    assert abs(reprojection_rmse(a, corr) - reprojection_rmse(b, corr)) < 1e-6
    world = np.array([c.world for c in corr])
    pa, _, _ = project_points(build_camera_matrix(a), world)
    pb, _, _ = project_points(build_camera_matrix(b), world)
    assert np.allclose(pa, pb, atol=1e-4)


def test_world_translation_shifts_camera_center():
    corr = synthetic_correspondences(n=12, seed=6)
    shift = np.array([250.0, -80.0, 12.0])
    moved = [Corr3D2D(world=c.world + shift, pixel=c.pixel) for c in corr]
    a = gold_standard(corr)
    b = gold_standard(moved)
    assert np.allclose(camera_center(b) - camera_center(a), shift, atol=1e-4)
    for name in ("omega", "phi", "kappa"):
        da = getattr(a, name) % (2 * math.pi)
        db = getattr(b, name) % (2 * math.pi)
        assert abs(da - db) < 1e-6 or abs(abs(da - db) - 2 * math.pi) < 1e-6


# --- reprojection RMSE --------------------------------------------------------

def test_rmse_zero_for_exact_pairs():
    corr = synthetic_correspondences(n=8, seed=9)
    assert reprojection_rmse(TRUE_POSE, corr) == pytest.approx(0.0, abs=1e-9)


def test_rmse_single_offset_pair():
    corr = synthetic_correspondences(n=8, seed=10)
    corr[3] = Corr3D2D(world=corr[3].world, pixel=corr[3].pixel + np.array([3.0, 0.0]))
    assert reprojection_rmse(TRUE_POSE, corr) == pytest.approx(math.sqrt(9.0 / 8.0))


def test_rmse_matches_per_pair_recomputation():
    corr = synthetic_correspondences(n=10, seed=11, noise=2.0)
    p = build_camera_matrix(TRUE_POSE)
    total = 0.0
    for c in corr:
        xh = np.append(c.world, 1.0)
        proj = p @ xh
        u, v = proj[0] / proj[2], proj[1] / proj[2]
        total += (u - c.pixel[0]) ** 2 + (v - c.pixel[1]) ** 2
    want = math.sqrt(total / len(corr))
    assert reprojection_rmse(TRUE_POSE, corr) == pytest.approx(want, rel=1e-12)
