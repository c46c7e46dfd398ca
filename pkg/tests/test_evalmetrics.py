"""Check-point and check-line discrepancy metrics."""

import math

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from lidreg.errors import EmptySet
from lidreg.evalmetrics import (
    SegmentPair,
    centroid_discrepancy,
    checkerboard_overlay,
    discrepancy_gain,
    hausdorff_segment_distance,
    mean_endpoint_line_distance,
    normalize_to_bytes,
    pair_line_report,
)


def seg(ax, ay, bx, by):
    return np.array([[ax, ay], [bx, by]], dtype=float)


def hausdorff_sampled(p, q, n=1000):
    """Dense-sampling Hausdorff oracle: n points per segment, both directions."""
    t = np.linspace(0.0, 1.0, n)[:, None]
    ps = p[0] + t * (p[1] - p[0])
    qs = q[0] + t * (q[1] - q[0])
    d = cdist(ps, qs)
    return max(d.min(axis=1).max(), d.min(axis=0).max())


# ---------------------------------------------------------------------------
# check points
# ---------------------------------------------------------------------------


def test_centroid_discrepancy_identical_pairs():
    pts = np.array([[1.0, 2.0], [3.0, 4.0], [-5.0, 0.0]])
    assert centroid_discrepancy(pts, pts.copy()) == (0.0, 0.0)


def test_centroid_discrepancy_equal_distances():
    predicted = np.array([[1.0, 0.0], [0.0, 1.0], [10.0, 10.0]])
    reference = np.array([[0.0, 0.0], [0.0, 0.0], [10.0, 9.0]])
    mean, std = centroid_discrepancy(predicted, reference)
    assert mean == pytest.approx(1.0)
    assert std == pytest.approx(0.0)


def test_centroid_discrepancy_hand_computed():
    predicted = np.array([[0.0, 0.0], [3.0, 4.0], [1.0, 1.0]])
    reference = np.array([[0.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
    mean, std = centroid_discrepancy(predicted, reference)
    # distances 1, 5, 0: mean 2, population std sqrt(14/3)
    assert mean == pytest.approx(2.0)
    assert std == pytest.approx(math.sqrt(14.0 / 3.0))
    # the scale factor converts pixel distances to meters
    mean_m, std_m = centroid_discrepancy(predicted, reference, scale=0.15)
    assert mean_m == pytest.approx(0.3)
    assert std_m == pytest.approx(0.15 * math.sqrt(14.0 / 3.0))


def test_centroid_discrepancy_input_validation():
    with pytest.raises(EmptySet):
        centroid_discrepancy(np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        centroid_discrepancy(np.zeros((3, 2)), np.zeros((4, 2)))


def test_discrepancy_gain_reference_values():
    assert discrepancy_gain(1.08, 0.56) == pytest.approx(48.15, abs=5e-3)
    assert discrepancy_gain(1.08, 0.40) == pytest.approx(62.96, abs=5e-3)
    assert discrepancy_gain(0.7, 0.7) == 0.0
    assert discrepancy_gain(1.0, 1.5) == pytest.approx(-50.0)
    with pytest.raises(ValueError):
        discrepancy_gain(0.0, 0.5)


# ---------------------------------------------------------------------------
# line-based baseline distance
# ---------------------------------------------------------------------------


def test_line_distance_identical_segments():
    s = seg(0, 0, 5, 3)
    assert mean_endpoint_line_distance(s, s.copy()) == 0.0


def test_line_distance_collinear_disjoint_is_zero():
    # the documented flaw: far-apart but collinear segments score zero
    a = seg(0, 0, 1, 0)
    b = seg(50, 0, 60, 0)
    assert mean_endpoint_line_distance(a, b) == pytest.approx(0.0, abs=1e-12)


def test_line_distance_parallel_offset():
    a = seg(0, 0, 10, 0)
    b = seg(2, 3.0, 8, 3.0)
    assert mean_endpoint_line_distance(a, b) == pytest.approx(3.0)


# ---------------------------------------------------------------------------
# segment-space Hausdorff distance
# ---------------------------------------------------------------------------


def test_hausdorff_identical_is_zero():
    s = seg(1, 1, 4, 5)
    assert hausdorff_segment_distance(s, s.copy()) == 0.0
    # orientation does not matter: the endpoint sets are equal
    assert hausdorff_segment_distance(s, s[::-1].copy()) == 0.0


def test_hausdorff_collinear_gap_takes_larger_end():
    # same direction, endpoint gaps of 2 at one end and 5 at the other
    a = seg(0, 0, 10, 0)
    b = seg(2, 0, 15, 0)
    assert hausdorff_segment_distance(a, b) == pytest.approx(5.0)
    assert hausdorff_segment_distance(b, a) == pytest.approx(5.0)


def test_hausdorff_four_pixel_offset_in_meters():
    # nearly identical horizontal segments, one endpoint 4 px off;
    # at 0.15 m/px the distance is 60 cm
    a = seg(0, 0, 10, 0)
    b = seg(0, 0, 10, 4)
    assert hausdorff_segment_distance(a, b) * 0.15 == pytest.approx(0.60)


def test_hausdorff_collinear_family_vs_line_baseline():
    # the motivating counterexample: the line baseline collapses to zero
    # on the collinear-gap family while Hausdorff reports the max gap
    for gap in (1.0, 5.0, 25.0, 100.0):
        a = seg(0, 0, 10, 0)
        b = seg(gap, 0, 10 + 2 * gap, 0)
        assert mean_endpoint_line_distance(a, b) == pytest.approx(0.0, abs=1e-12)
        assert hausdorff_segment_distance(a, b) == pytest.approx(2 * gap)


def test_hausdorff_matches_dense_sampling():
    rng = np.random.default_rng(41)
    for _ in range(300):
        a = rng.uniform(-5.0, 5.0, (2, 2))
        b = rng.uniform(-5.0, 5.0, (2, 2))
        closed = hausdorff_segment_distance(a, b)
        assert abs(closed - hausdorff_sampled(a, b)) < 1e-3


def test_hausdorff_metric_properties():
    rng = np.random.default_rng(59)
    for _ in range(1000):
        a = rng.uniform(-5.0, 5.0, (2, 2))
        b = rng.uniform(-5.0, 5.0, (2, 2))
        c = rng.uniform(-5.0, 5.0, (2, 2))
        dab = hausdorff_segment_distance(a, b)
        dba = hausdorff_segment_distance(b, a)
        assert dab == dba  # symmetric by construction
        assert dab >= 0.0
        assert dab > 0.0  # distinct random segments never coincide
        dac = hausdorff_segment_distance(a, c)
        dbc = hausdorff_segment_distance(b, c)
        assert dac <= dab + dbc + 1e-9  # triangle inequality


# ---------------------------------------------------------------------------
# paired reporting
# ---------------------------------------------------------------------------


def test_pair_line_report_identical_pairs():
    s = seg(0, 0, 3, 3)
    rows, summary = pair_line_report([SegmentPair(s, s.copy())] * 3)
    assert [r[0] for r in rows] == [0, 1, 2]
    assert all(r[1] == 0.0 and r[2] == 0.0 for r in rows)
    assert summary["line"] == (0.0, 0.0)
    assert summary["hausdorff"] == (0.0, 0.0)


def test_pair_line_report_mean_and_std():
    base = seg(0, 0, 10, 0)
    pairs = [
        SegmentPair(base, seg(0, 1, 10, 1)),   # parallel offset 1
        SegmentPair(base, seg(0, 3, 10, 3)),   # parallel offset 3
    ]
    rows, summary = pair_line_report(pairs)
    assert rows[0][2] == pytest.approx(1.0)
    assert rows[1][2] == pytest.approx(3.0)
    assert summary["hausdorff"][0] == pytest.approx(2.0)
    assert summary["hausdorff"][1] == pytest.approx(1.0)
    assert summary["line"][0] == pytest.approx(2.0)
    # scale converts to meters
    _, meters = pair_line_report(pairs, scale=0.15)
    assert meters["hausdorff"][0] == pytest.approx(0.3)


def test_pair_line_report_empty_rejected():
    with pytest.raises(EmptySet):
        pair_line_report([])


# ---------------------------------------------------------------------------
# display helpers
# ---------------------------------------------------------------------------


def test_normalize_to_bytes_constant_maps_to_zero():
    assert np.array_equal(normalize_to_bytes(np.full((4, 4), 7.3)),
                          np.zeros((4, 4), dtype=np.uint8))


def test_normalize_to_bytes_spans_full_range():
    ramp = np.linspace(-2.0, 6.0, 256).reshape(16, 16)
    out = normalize_to_bytes(ramp)
    assert out.dtype == np.uint8
    assert out.min() == 0 and out.max() == 255
    assert np.all(np.diff(out.ravel().astype(int)) >= 0)  # monotone


def test_checkerboard_overlay_alternates_tiles():
    luma = np.full((8, 8), 10.0)
    raster = np.full((8, 8), 123.456)  # constant -> normalizes to 0
    out = checkerboard_overlay(luma, raster, tile=4)
    assert out.dtype == np.uint8
    assert np.all(out[:4, :4] == 10)   # even tile: optical luma
    assert np.all(out[:4, 4:] == 0)    # odd tile: normalized raster
    assert np.all(out[4:, :4] == 0)
    assert np.all(out[4:, 4:] == 10)


def test_checkerboard_overlay_validation():
    with pytest.raises(ValueError):
        checkerboard_overlay(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(ValueError):
        checkerboard_overlay(np.zeros((4, 4)), np.zeros((4, 4)), tile=0)
