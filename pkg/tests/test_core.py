import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vqm3d.core import (
    CameraParams,
    DepthFrame,
    Frame,
    ScoreSeries,
    VqmConstants,
    depth_code,
    metric_depth,
    normalize_depth,
)

from oracles import depth_of_code


def test_metric_depth_endpoints():
    cam = CameraParams(z_near=1.0, z_far=10.0)
    assert metric_depth(255, cam) == pytest.approx(1.0, abs=1e-15)
    assert metric_depth(0, cam) == pytest.approx(10.0, abs=1e-12)


def test_metric_depth_matches_table_and_is_strictly_decreasing():
    cam = CameraParams(z_near=1.0, z_far=10.0)
    table = [depth_of_code(v, 1.0, 10.0) for v in range(256)]
    got = metric_depth(np.arange(256), cam)
    np.testing.assert_allclose(got, table, rtol=1e-14)
    assert all(a > b for a, b in zip(table, table[1:]))
    assert np.all(np.diff(got) < 0)
    # v=128 from the closed form
    assert got[128] == pytest.approx(1.0 / (128 / 255 * 0.9 + 0.1), rel=1e-14)


def test_metric_depth_positive_finite_for_default_range():
    z = metric_depth(np.arange(256), CameraParams())
    assert np.all(np.isfinite(z)) and np.all(z > 0)


def test_depth_code_inverts_metric_depth_for_every_code():
    cam = CameraParams()
    codes = np.arange(256)
    np.testing.assert_array_equal(depth_code(metric_depth(codes, cam), cam), codes)


def test_normalize_depth_examples():
    assert np.all(normalize_depth(DepthFrame(np.zeros((3, 3), np.uint8))) == 0.0)
    assert np.all(normalize_depth(DepthFrame(np.full((3, 3), 255, np.uint8))) == 1.0)
    assert normalize_depth(DepthFrame(np.full((1, 1), 51, np.uint8)))[0, 0] == 0.2


def test_normalize_depth_round_trip_all_codes():
    codes = np.arange(256, dtype=np.uint8).reshape(16, 16)
    n = normalize_depth(DepthFrame(codes))
    assert n.min() >= 0.0 and n.max() <= 1.0
    np.testing.assert_array_equal(np.rint(n * 255).astype(np.uint8), codes)


@given(st.lists(st.integers(0, 255), min_size=1, max_size=64))
def test_normalize_depth_in_unit_range(values):
    n = normalize_depth(DepthFrame(np.array([values], dtype=np.uint8)))
    assert np.all((n >= 0) & (n <= 1))


def test_frame_samples_and_shape():
    f = Frame(np.arange(12, dtype=np.uint8).reshape(3, 4))
    assert (f.width, f.height, f.channels) == (4, 3, 1)
    assert f.samples().size == f.width * f.height * f.channels
    rgb = Frame(np.zeros((3, 4, 3), np.uint8))
    assert rgb.channels == 3 and rgb.samples().size == 36


def test_frame_rejects_out_of_range_and_non_integral():
    with pytest.raises(ValueError):
        Frame(np.array([[256.0]]))
    with pytest.raises(ValueError):
        Frame(np.array([[-1]]))
    with pytest.raises(ValueError):
        Frame(np.array([[1.5]]))
    assert Frame.from_float([[1.4, 300.0, -3.0]]).data.tolist() == [[1, 255, 0]]


def test_frame_is_read_only():
    src = np.zeros((2, 2), np.uint8)
    f = Frame(src)
    src[0, 0] = 9
    assert f.data[0, 0] == 0
    with pytest.raises(ValueError):
        f.data[0, 0] = 1


def test_luma_weights_for_rgb():
    f = Frame(np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255]]], np.uint8))
    np.testing.assert_allclose(f.luma()[0], [0.299 * 255, 0.587 * 255, 0.114 * 255])


def test_chroma_shape_checked():
    y = np.zeros((5, 5), np.uint8)
    Frame(y, chroma=(np.zeros((3, 3), np.uint8), np.zeros((3, 3), np.uint8)))
    with pytest.raises(ValueError):
        Frame(y, chroma=(np.zeros((2, 2), np.uint8), np.zeros((2, 2), np.uint8)))


@pytest.mark.parametrize("kwargs", [
    {"side": 0}, {"side": 2}, {"z_near": 0.0}, {"z_near": 5.0, "z_far": 5.0},
    {"focal_length": 0.0}, {"baseline": -1.0}, {"alpha": 0.0},
])
def test_camera_params_invalid(kwargs):
    with pytest.raises(ValueError):
        CameraParams(**kwargs)


def test_camera_defaults():
    cam = CameraParams()
    assert cam.alpha == 120.0 and cam.z_near == 0.3 and cam.z_far == 10.0
    assert cam.fb == pytest.approx(cam.focal_length * cam.baseline)


def test_vqm_constants_defaults_and_validation():
    c = VqmConstants()
    assert (c.K, c.a, c.b, c.c) == (5.0, 8, 8, 6)
    with pytest.raises(ValueError):
        VqmConstants(K=0)
    with pytest.raises(ValueError):
        VqmConstants(a=1.5)
    with pytest.raises(ValueError):
        VqmConstants(c=0)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_score_series_aggregate_is_mean(values):
    s = ScoreSeries("x", values)
    assert s.aggregate == pytest.approx(sum(values) / len(values), rel=1e-9, abs=1e-6)
    assert len(s) == len(values)


def test_score_series_needs_frames():
    with pytest.raises(ValueError):
        ScoreSeries("x", [])
