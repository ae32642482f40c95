import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vqm3d.core import CameraParams, DepthFrame, Frame, depth_code
from vqm3d.dibr import HoleFillWarning, WarpResult, disparity, hhf_fill, render_sequence, warp_view

from oracles import hhf_pyramid, zbuffer_warp

CAM = CameraParams(focal_length=100.0, baseline=0.05, side=1, z_near=0.3, z_far=10.0)


def _check_against_oracle(ref, codes, cam):
    res = warp_view(Frame(ref), DepthFrame(codes), cam)
    out, hole = zbuffer_warp(ref.tolist(), codes.tolist(), cam.fb, cam.side, cam.z_near, cam.z_far)
    np.testing.assert_array_equal(res.virtual_view.data, np.array(out, np.uint8))
    np.testing.assert_array_equal(res.hole_mask, np.array(hole))
    assert np.all(res.virtual_view.data[res.hole_mask] == 0)


def _fixtures_8x8():
    rng = np.random.default_rng(7)
    ref = rng.integers(1, 256, (8, 8), dtype=np.uint8)
    step = np.full((8, 8), 20, np.uint8)
    step[:, 4:] = 250
    step_rev = step[:, ::-1].copy()
    diag = (np.add.outer(np.arange(8), np.arange(8)) * 16).clip(0, 255).astype(np.uint8)
    out = [
        ("step", ref, step),
        ("step_reversed", ref, step_rev),
        ("diagonal", ref, diag),
        ("constant", ref, np.full((8, 8), 128, np.uint8)),
        ("random_codes", ref, rng.integers(0, 256, (8, 8), dtype=np.uint8)),
        ("equal_depth_collisions", ref, np.tile(np.array([255, 0] * 4, np.uint8), (8, 1))),
    ]
    for i in range(20):
        out.append((f"random{i}", rng.integers(0, 256, (8, 8), dtype=np.uint8),
                    rng.choice(np.array([0, 60, 120, 200, 255], np.uint8), (8, 8))))
    return out


FIXTURES = _fixtures_8x8()


@pytest.mark.parametrize("side", [1, -1])
@pytest.mark.parametrize("name,ref,codes", FIXTURES, ids=[f[0] for f in FIXTURES])
def test_warp_matches_zbuffer_oracle(name, ref, codes, side):
    cam = CameraParams(focal_length=40.0, baseline=0.05, side=side, z_near=0.3, z_far=10.0)
    _check_against_oracle(ref, codes, cam)


@settings(max_examples=60, deadline=None)
@given(arrays(np.uint8, (8, 8)), arrays(np.uint8, (8, 8)), st.sampled_from([1, -1]),
       st.floats(5.0, 60.0))
def test_warp_oracle_property(ref, codes, side, focal):
    cam = CameraParams(focal_length=focal, baseline=0.05, side=side, z_near=0.3, z_far=10.0)
    _check_against_oracle(ref, codes, cam)


def test_constant_plane_shifts_with_border_hole_band():
    code = depth_code(0.5, CAM)
    d = int(disparity(np.array([code]), CAM)[0])
    assert d > 0
    ref = np.arange(16 * 32, dtype=np.uint8).reshape(16, 32)
    res = warp_view(Frame(ref), DepthFrame(np.full((16, 32), code, np.uint8)), CAM)
    np.testing.assert_array_equal(res.virtual_view.data[:, d:], ref[:, :32 - d])
    assert res.hole_mask[:, :d].all() and not res.hole_mask[:, d:].any()


def test_zero_disparity_is_identity():
    cam = CameraParams(focal_length=1.0, baseline=0.01, z_near=0.3, z_far=10.0)
    codes = np.arange(64, dtype=np.uint8).reshape(8, 8) * 4
    assert np.all(disparity(codes, cam) == 0)
    ref = Frame(np.arange(64, dtype=np.uint8).reshape(8, 8))
    res = warp_view(ref, DepthFrame(codes), cam)
    assert res.virtual_view.equals(ref) and not res.hole_mask.any()


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, (6, 10)), arrays(np.uint8, (6, 10)))
def test_warp_preserves_values_and_nearer_wins(ref, codes):
    res = warp_view(Frame(ref), DepthFrame(codes), CAM)
    d = disparity(codes, CAM)
    for y in range(6):
        row_vals = set(ref[y].tolist())
        for x in range(10):
            if not res.hole_mask[y, x]:
                assert res.virtual_view.data[y, x] in row_vals
        # every source landing on a target must be no nearer than the survivor
        for x in range(10):
            t = x + d[y, x]
            if 0 <= t < 10:
                srcs = [s for s in range(10) if s + d[y, s] == t]
                best = max(codes[y, s] for s in srcs)  # larger code = nearer
                winner = max(s for s in srcs if codes[y, s] == best)
                assert res.virtual_view.data[y, t] == ref[y, winner]


def test_warp_dimension_mismatch():
    with pytest.raises(ValueError):
        warp_view(Frame(np.zeros((4, 4), np.uint8)), DepthFrame(np.zeros((4, 5), np.uint8)), CAM)


def test_warp_rgb_keeps_channels():
    ref = np.random.default_rng(0).integers(0, 256, (6, 6, 3), dtype=np.uint8)
    codes = np.full((6, 6), 200, np.uint8)
    res = warp_view(Frame(ref), DepthFrame(codes), CAM)
    assert res.virtual_view.data.shape == (6, 6, 3)
    for c in range(3):
        single = warp_view(Frame(ref[:, :, c]), DepthFrame(codes), CAM)
        np.testing.assert_array_equal(single.virtual_view.data, res.virtual_view.data[:, :, c])


def test_hhf_empty_mask_is_noop():
    f = Frame(np.arange(16, dtype=np.uint8).reshape(4, 4))
    assert hhf_fill(WarpResult(f, np.zeros((4, 4), bool))).equals(f)


def test_hhf_single_hole_in_constant_image():
    data = np.full((8, 8), 100, np.uint8)
    data[3, 5] = 0
    mask = np.zeros((8, 8), bool)
    mask[3, 5] = True
    out = hhf_fill(WarpResult(Frame(data), mask))
    assert out.data[3, 5] == 100 and np.all(out.data == 100)


def test_hhf_ramp_hole_against_pyramid_oracle():
    ramp = np.tile(np.arange(16) * 10 + 30, (16, 1)).astype(np.uint8)
    mask = np.zeros((16, 16), bool)
    mask[5:9, 6:10] = True
    data = np.where(mask, 0, ramp).astype(np.uint8)
    out = hhf_fill(WarpResult(Frame(data), mask)).data
    expected = np.clip(np.rint(np.array(hhf_pyramid(data.tolist(), mask.tolist()))), 0, 255)
    np.testing.assert_array_equal(out, expected.astype(np.uint8))
    assert ramp.min() <= out[mask].min() and out[mask].max() <= ramp.max()
    np.testing.assert_array_equal(out[~mask], ramp[~mask])


@settings(max_examples=60, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 13), st.integers(1, 13))), st.data())
def test_hhf_matches_oracle_and_leaves_no_holes(data, draw):
    mask = draw.draw(arrays(bool, data.shape))
    data = np.where(mask, 0, data).astype(np.uint8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HoleFillWarning)
        out = hhf_fill(WarpResult(Frame(data), mask))
    np.testing.assert_array_equal(out.data[~mask], data[~mask])
    if (~mask).any():
        expected = np.clip(np.rint(np.array(hhf_pyramid(data.tolist(), mask.tolist()))), 0, 255)
        np.testing.assert_array_equal(out.data, expected.astype(np.uint8))
    # output carries no hole; refilling with an empty mask changes nothing
    again = hhf_fill(WarpResult(out, np.zeros(mask.shape, bool)))
    assert again.equals(out)


def test_hhf_all_holes_warns_and_fills_zero():
    mask = np.ones((5, 5), bool)
    with pytest.warns(HoleFillWarning):
        out = hhf_fill(WarpResult(Frame(np.zeros((5, 5), np.uint8)), mask))
    assert np.all(out.data == 0)


def test_hhf_rgb():
    data = np.zeros((4, 4, 3), np.uint8)
    data[...] = (10, 20, 30)
    mask = np.zeros((4, 4), bool)
    mask[0, 0] = True
    data[0, 0] = 0
    out = hhf_fill(WarpResult(Frame(data), mask))
    assert out.data[0, 0].tolist() == [10, 20, 30]


def test_render_sequence_examples():
    cam = CameraParams(focal_length=1.0, baseline=0.01)
    seq = [Frame(np.full((4, 4), k, np.uint8)) for k in range(3)]
    depth = [DepthFrame(np.full((4, 4), 10, np.uint8)) for _ in range(3)]
    out = render_sequence(seq, depth, cam)
    assert all(a.equals(b) for a, b in zip(out, seq))
    assert len(render_sequence(seq[:1], depth[:1], cam)) == 1
    with pytest.raises(ValueError):
        render_sequence(seq, depth[:2], cam)


def test_render_sequence_constant_depth_frames_identical_and_parallel_equal():
    rng = np.random.default_rng(3)
    ref = Frame(rng.integers(0, 256, (12, 16), dtype=np.uint8))
    depth = DepthFrame(np.full((12, 16), 180, np.uint8))
    out = render_sequence([ref] * 5, [depth] * 5, CAM)
    assert all(a.equals(b) for a, b in itertools.combinations(out, 2))
    par = render_sequence([ref] * 5, [depth] * 5, CAM, workers=3)
    assert all(a.equals(b) for a, b in zip(out, par))
