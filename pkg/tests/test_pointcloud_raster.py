"""Point-cloud container + I/O, raster containers, grid file formats."""

import numpy as np
import pytest

from lidreg.errors import InputError
from lidreg.pointcloud import (
    CLASS_BUILDING,
    CLASS_GROUND,
    PointCloud,
    read_cloud,
    read_cloud_text,
    write_cloud,
)
from lidreg.raster import (
    OpticalImage,
    RasterImage,
    luma,
    pose_digest,
    read_float_grid,
    read_image,
    write_float_grid,
    write_image,
)


def _toy_cloud(n=17, seed=0):
    rng = np.random.default_rng(seed)
    return PointCloud(
        xyz=rng.uniform(-50, 50, size=(n, 3)),
        intensity=rng.uniform(0, 255, size=n),
        classes=rng.integers(0, CLASS_BUILDING + 1, size=n).astype(np.uint8),
    )


def test_cloud_columns_and_subset():
    cloud = _toy_cloud()
    assert len(cloud) == 17
    assert np.array_equal(cloud.x, cloud.xyz[:, 0])
    assert np.array_equal(cloud.z, cloud.xyz[:, 2])
    sub = cloud.subset(cloud.classes == CLASS_GROUND)
    assert np.all(sub.classes == CLASS_GROUND)
    by_index = cloud.subset(np.array([3, 1, 4]))
    assert np.array_equal(by_index.xyz, cloud.xyz[[3, 1, 4]])


def test_cloud_shape_validation():
    with pytest.raises(ValueError):
        PointCloud(np.zeros((3, 2)), np.zeros(3), np.zeros(3, dtype=np.uint8))
    with pytest.raises(ValueError):
        PointCloud(np.zeros((3, 3)), np.zeros(4), np.zeros(3, dtype=np.uint8))


def test_cloud_text_round_trip(tmp_path):
    cloud = _toy_cloud()
    path = tmp_path / "cloud.txt"
    write_cloud(path, cloud)
    again = read_cloud(path)
    assert np.array_equal(again.xyz, cloud.xyz)  # repr() floats survive exactly
    assert np.array_equal(again.intensity, cloud.intensity)
    assert np.array_equal(again.classes, cloud.classes)


def test_cloud_binary_round_trip(tmp_path):
    cloud = _toy_cloud(n=1000, seed=3)
    path = tmp_path / "cloud.bin"
    write_cloud(path, cloud)
    again = read_cloud(path)
    assert np.array_equal(again.xyz, cloud.xyz)
    assert np.array_equal(again.classes, cloud.classes)


def test_cloud_text_reader_skips_comments_and_rejects_garbage(tmp_path):
    path = tmp_path / "in.txt"
    path.write_text("# header\n1.0 2.0 3.0 100.0 1\n\n")
    cloud = read_cloud_text(path)
    assert len(cloud) == 1 and cloud.classes[0] == 1

    path.write_text("1.0 2.0 3.0 100.0\n")
    with pytest.raises(InputError):
        read_cloud_text(path)

    path.write_text("1.0 2.0 3.0 100.0 9\n")  # class code out of range
    with pytest.raises(InputError):
        read_cloud_text(path)


# --- rasters ------------------------------------------------------------

def test_raster_cell_of_floor_semantics():
    grid = RasterImage(np.zeros((4, 5)), origin=(10.0, 20.0), resolution=2.0)
    row, col = grid.cell_of(10.0, 20.0)
    assert (row, col) == (0, 0)
    row, col = grid.cell_of(13.9, 25.9)
    assert (row, col) == (2, 1)
    rows, cols = grid.cell_of(np.array([10.0, 11.9]), np.array([20.0, 21.9]))
    assert np.array_equal(rows, [0, 0]) and np.array_equal(cols, [0, 0])


def test_optical_image_round_trip_mapping():
    rgb = np.zeros((6, 8, 3), dtype=np.uint8)
    img = OpticalImage(rgb=rgb, gsd=0.5, origin=(100.0, 200.0))
    xy = np.array([[100.0, 200.0], [101.0, 199.0], [103.5, 197.5]])
    pix = img.world_to_pixel(xy)
    assert np.allclose(pix, [[0, 0], [2, 2], [7, 5]])
    assert np.allclose(img.pixel_to_world(pix), xy)


def test_optical_image_requires_uint8():
    with pytest.raises(ValueError):
        OpticalImage(rgb=np.zeros((4, 4, 3)), gsd=0.1)


def test_luma_weights():
    rgb = np.zeros((1, 3, 3), dtype=np.uint8)
    rgb[0, 0] = (255, 0, 0)
    rgb[0, 1] = (0, 255, 0)
    rgb[0, 2] = (0, 0, 255)
    out = luma(rgb)
    assert out.dtype == np.float64
    assert np.allclose(out[0], [0.299 * 255, 0.587 * 255, 0.114 * 255])
    white = luma(np.full((1, 1, 3), 255, dtype=np.uint8))
    assert np.isclose(white[0, 0], 255.0)


def test_image_png_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    img = OpticalImage(
        rgb=rng.integers(0, 256, size=(12, 10, 3), dtype=np.uint8),
        gsd=0.25,
        origin=(-3.5, 99.0),
    )
    path = tmp_path / "img.png"
    write_image(path, img)
    again = read_image(path)
    assert np.array_equal(again.rgb, img.rgb)
    assert again.gsd == img.gsd
    assert again.origin == img.origin


def test_float_grid_round_trip_and_metadata(tmp_path):
    rng = np.random.default_rng(2)
    values = rng.normal(size=(7, 9))
    path = tmp_path / "grid.f32"
    write_float_grid(path, values, channel="z", pose_hash="abc123")
    back, channel, pose_hash = read_float_grid(path)
    assert back.dtype == np.float32
    assert np.allclose(back, values.astype(np.float32))
    assert channel == "z"
    assert pose_hash == "abc123"


def test_pose_digest_stable_and_sensitive():
    from lidreg.camera import CameraPose

    pose = CameraPose(1000, 1000, 0, 10, 10, 0, 0, 100, np.pi, 0, 0)
    d1 = pose_digest(pose)
    assert d1 == pose_digest(pose)
    assert len(d1) == 12
    moved = pose.with_externals(pose.externals + 1e-9)
    assert pose_digest(moved) != d1
