"""Estimator front ends: sklearn parameter contract plus fitted behavior."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lidreg.camera import Frame, build_camera_matrix, project_points
from lidreg.estimators import CoarseRegistrar, FineRegistrar, SuperResolver
from lidreg.superres import FistaConfig, super_resolve, transfer_values


def random_cloud(seed=2, n=3000):
    rng = np.random.default_rng(seed)
    xyz = np.column_stack([
        rng.uniform(-9.0, 9.0, n), rng.uniform(-9.0, 9.0, n), rng.uniform(0.0, 5.0, n),
    ])
    return np.column_stack([xyz, rng.uniform(0.0, 255.0, n)])


NADIR_VEC = np.array([800.0, 800.0, 0.0, 49.5, 49.5,
                      0.0, 0.0, 120.0, np.pi, 0.0, 0.0])


# ---------------------------------------------------------------------------
# shared sklearn plumbing
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("factory", [SuperResolver, CoarseRegistrar, FineRegistrar])
def test_get_set_params_round_trip(factory):
    est = factory()
    params = est.get_params()
    assert params  # every hyperparameter is exposed
    rebuilt = factory(**params)
    assert rebuilt.get_params() == params
    assert est.set_params(**params) is est


def test_clone_produces_unfitted_copy():
    est = SuperResolver(lam=0.5, k_max=7)
    est.fit()
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert hasattr(est, "config_") and not hasattr(twin, "config_")


@pytest.mark.parametrize("call", [
    lambda est: est.transform(None),
    lambda est: est.resolve(random_cloud(), NADIR_VEC, Frame(10, 10)),
])
def test_super_resolver_requires_fit(call):
    with pytest.raises(NotFittedError):
        call(SuperResolver())


def test_registrars_require_fit(mini_scene):
    cloud, _, _ = mini_scene
    with pytest.raises(NotFittedError):
        CoarseRegistrar().predict(np.zeros((2, 3)))
    with pytest.raises(NotFittedError):
        FineRegistrar().predict(np.zeros((2, 3)))
    with pytest.raises(NotFittedError):
        FineRegistrar().transform(cloud)


# ---------------------------------------------------------------------------
# SuperResolver
# ---------------------------------------------------------------------------


def test_super_resolver_validates_params_at_fit():
    with pytest.raises(ValueError):
        SuperResolver(gamma=1.0).fit()
    with pytest.raises(ValueError):
        SuperResolver(lam=-1.0).fit()


def test_super_resolver_matches_functional_route():
    from lidreg._validation import check_cloud, check_pose

    data = random_cloud()
    frame = Frame(100, 100)
    est = SuperResolver(k_max=80).fit()
    raster = est.resolve(data, NADIR_VEC, frame, channel="i")
    direct, info = super_resolve(
        check_cloud(data), check_pose(NADIR_VEC), frame,
        FistaConfig(k_max=80), channel="i",
    )
    assert np.array_equal(raster, direct)
    assert est.info_["n_transferred"] == info["n_transferred"]


def test_super_resolver_transform_fills_sparse():
    from lidreg._validation import check_cloud, check_pose

    sparse = transfer_values(check_cloud(random_cloud()), check_pose(NADIR_VEC),
                             Frame(80, 80), "z")
    est = SuperResolver(k_max=150).fit()
    out = est.transform(sparse)
    assert out.shape == (80, 80)
    assert np.array_equal(out[sparse.mask], sparse.values[sparse.mask])
    assert np.isfinite(out).all()
    assert est.info_["iterations"] > 0


# ---------------------------------------------------------------------------
# CoarseRegistrar
# ---------------------------------------------------------------------------


def test_coarse_registrar_fits_reference_scene(default_scene):
    cloud, image, truth = default_scene
    est = CoarseRegistrar()
    assert est.fit((cloud, image)) is est
    assert len(est.regions_) == 28
    assert len(est.matches_) >= 20
    assert est.rmse_ < 5.0  # pixels

    pts = truth.checkpoints()
    predicted = est.predict(pts)
    reference, _, _ = project_points(build_camera_matrix(truth.pose), pts)
    err = np.linalg.norm(predicted - reference, axis=1)
    assert err.mean() < 3.0
    assert err.max() < 6.0


def test_coarse_registrar_validates_filter_method(mini_scene):
    cloud, image, _ = mini_scene
    with pytest.raises(ValueError):
        CoarseRegistrar(filter_method="ransac??").fit((cloud, image))


# ---------------------------------------------------------------------------
# FineRegistrar
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def fitted_fine(mini_scene):
    cloud, image, truth = mini_scene
    est = FineRegistrar(patch_width=155, patch_height=155,
                        max_evals=30, inner_k_max=40)
    est.fit((cloud, image), truth.pose)
    return est, cloud, truth


def test_fine_registrar_optimizes_all_patches(fitted_fine):
    est, _, _ = fitted_fine
    assert len(est.results_) == 4
    for result in est.results_:
        assert not result.fallback
        assert result.value >= result.init_value  # never regresses


def test_fine_registrar_predict_projects(fitted_fine):
    est, _, truth = fitted_fine
    pts = truth.checkpoints()
    pixels = est.predict(pts)
    assert pixels.shape == (len(pts), 2)
    assert np.isfinite(pixels).all()
    # starting at the rendering pose, refinement stays within a couple px
    reference, _, _ = project_points(build_camera_matrix(truth.pose), pts)
    assert np.linalg.norm(pixels - reference, axis=1).mean() < 3.0


def test_fine_registrar_transform_renders(fitted_fine):
    est, cloud, _ = fitted_fine
    raster = est.transform(cloud)
    assert raster.shape == (310, 310)
    assert np.isfinite(raster).all()
    assert est.info_["n_transferred"] > 1000


def test_fine_registrar_validates_objective(mini_scene):
    cloud, image, truth = mini_scene
    with pytest.raises(ValueError):
        FineRegistrar(objective="ssd").fit((cloud, image), truth.pose)
