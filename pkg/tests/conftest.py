"""Shared fixtures: synthetic scenes reused across test modules.

Scene generation is deterministic but not free (the default 28-building
scene takes a couple of seconds), so the fixtures are session-scoped and
every test treats their contents as read-only.
"""

import numpy as np
import pytest

from lidreg.synth import SceneSpec, generate_scene, nominal_pose, perturb_pose


MINI_SPEC = SceneSpec(
    extent=(93.0, 93.0),
    n_buildings=6,
    tree_count=4,
    gsd=0.3,
    seed=3,
)


@pytest.fixture(scope="session")
def mini_scene():
    """Small scene for fast structural tests: 6 buildings, 310x310 image."""
    cloud, image, truth = generate_scene(MINI_SPEC)
    return cloud, image, truth


@pytest.fixture(scope="session")
def default_scene():
    """The reference scene: 28 buildings, 2 pts/m2, 0.15 m GSD, nadir pose."""
    spec = SceneSpec()
    cloud, image, truth = generate_scene(spec)
    return cloud, image, truth


@pytest.fixture(scope="session")
def shifted_scene():
    """Reference scene rendered under a pose 1.5 m / 0.3 deg off nominal."""
    spec = SceneSpec()
    nominal = nominal_pose(spec.extent, spec.gsd, spec.flying_height)
    pose_true = perturb_pose(nominal, 1.5, np.radians(0.3), seed=spec.seed + 1)
    cloud, image, truth = generate_scene(spec, true_pose=pose_true)
    return cloud, image, truth
