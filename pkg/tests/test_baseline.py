import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vqm3d.baseline import SsimSpec, psnr, sequence_metric, ssim, weighted_psnr
from vqm3d.core import Frame
from vqm3d.synthetic import make_scene

from oracles import ssim_windows

small_frames = arrays(np.uint8, st.tuples(st.integers(8, 14), st.integers(8, 14)))


def test_psnr_identical_is_cap(rng):
    f = Frame(rng.integers(0, 256, (8, 8), dtype=np.uint8))
    assert psnr(f, f) == 100.0


def test_psnr_constant_offset():
    a = Frame(np.full((8, 8), 100, np.uint8))
    b = Frame(np.full((8, 8), 116, np.uint8))
    # MSE 256 with peak 255 is 24.048 dB (24.08 would need a peak of 256)
    assert psnr(a, b) == pytest.approx(24.048, abs=0.0005)
    assert psnr(a, b) == pytest.approx(10 * math.log10(255 ** 2 / 256), abs=1e-12)


def test_psnr_random_pair_matches_direct_mse(rng):
    a = rng.integers(0, 256, (9, 11), dtype=np.uint8)
    b = rng.integers(0, 256, (9, 11), dtype=np.uint8)
    mse = sum((int(p) - int(q)) ** 2 for p, q in zip(a.ravel(), b.ravel())) / a.size
    assert psnr(Frame(a), Frame(b)) == pytest.approx(10 * math.log10(255 ** 2 / mse), abs=1e-9)


@settings(max_examples=50)
@given(small_frames, st.data())
def test_psnr_symmetric(a, data):
    b = data.draw(arrays(np.uint8, a.shape))
    assert psnr(Frame(a), Frame(b)) == psnr(Frame(b), Frame(a))


def test_psnr_rgb_mode(rng):
    a = rng.integers(0, 256, (6, 6, 3), dtype=np.uint8)
    b = a.copy()
    b[..., 0] = 255 - b[..., 0]
    mse = np.mean((a.astype(float) - b.astype(float)) ** 2)
    assert psnr(Frame(a), Frame(b), color_mode="rgb") == pytest.approx(10 * math.log10(255 ** 2 / mse), abs=1e-9)
    with pytest.raises(ValueError):
        psnr(Frame(a), Frame(b), color_mode="hsv")


def test_psnr_dimension_mismatch():
    with pytest.raises(ValueError):
        psnr(Frame(np.zeros((4, 4), np.uint8)), Frame(np.zeros((4, 5), np.uint8)))


def test_weighted_psnr_examples():
    assert weighted_psnr([(31.5, 1), (31.5, 1)]) == 31.5
    assert weighted_psnr([(28.0, 1), (40.0, 0)]) == 28.0
    assert weighted_psnr([(30.0, 0.7), (40.0, 0.3)]) == pytest.approx(33.0, abs=1e-12)
    with pytest.raises(ValueError):
        weighted_psnr([(30.0, 0), (40.0, 0)])
    with pytest.raises(ValueError):
        weighted_psnr([(30.0, -1), (40.0, 2)])


@given(st.lists(st.floats(0, 100), min_size=1, max_size=10), st.floats(0.01, 10))
def test_weighted_psnr_uniform_is_mean(scores, w):
    got = weighted_psnr([(s, w) for s in scores])
    assert got == pytest.approx(sum(scores) / len(scores), rel=1e-12, abs=1e-12)


def test_ssim_identical_is_one(rng):
    f = Frame(rng.integers(0, 256, (16, 16), dtype=np.uint8))
    assert ssim(f, f) == pytest.approx(1.0, abs=1e-12)
    assert ssim(f, f, SsimSpec(gaussian=True)) == pytest.approx(1.0, abs=1e-12)


def test_ssim_matches_windowed_oracle(rng):
    a = rng.integers(0, 256, (12, 14), dtype=np.uint8)
    b = np.clip(a.astype(int) + rng.integers(-30, 31, a.shape), 0, 255).astype(np.uint8)
    assert ssim(Frame(a), Frame(b)) == pytest.approx(ssim_windows(a.tolist(), b.tolist()), abs=1e-9)


def test_ssim_constant_vs_noisy(rng):
    a = np.full((32, 32), 128, np.uint8)
    b = np.clip(128 + rng.normal(0, 60, a.shape), 0, 255).astype(np.uint8)
    got = ssim(Frame(a), Frame(b))
    assert got < 0.5
    assert got == pytest.approx(ssim_windows(a.tolist(), b.tolist()), abs=1e-9)


def test_ssim_prefers_shift_over_scramble_at_equal_mse(rng):
    color, _ = make_scene(32, 32, 1, seed=1)
    a = color[0].data.astype(int)
    shifted = a + 5
    signs = rng.choice([-5, 5], a.shape)
    scrambled = a + signs
    assert np.mean((shifted - a) ** 2) == np.mean((scrambled - a) ** 2) == 25
    s_shift = ssim_windows(a.tolist(), shifted.tolist())
    s_scr = ssim_windows(a.tolist(), scrambled.tolist())
    assert s_shift > s_scr
    assert ssim(Frame(a.astype(np.uint8)), Frame(shifted.astype(np.uint8))) > \
        ssim(Frame(a.astype(np.uint8)), Frame(scrambled.astype(np.uint8)))


@settings(max_examples=50, deadline=None)
@given(small_frames, st.data())
def test_ssim_never_exceeds_one(a, data):
    b = data.draw(arrays(np.uint8, a.shape))
    assert ssim(Frame(a), Frame(b)) <= 1.0 + 1e-12
    if np.ptp(a) > 0:
        assert ssim(Frame(a), Frame(a)) == pytest.approx(1.0, abs=1e-9)


def test_ssim_errors():
    with pytest.raises(ValueError):
        ssim(Frame(np.zeros((4, 4), np.uint8)), Frame(np.zeros((4, 4), np.uint8)))
    with pytest.raises(ValueError):
        ssim(Frame(np.zeros((8, 8), np.uint8)), Frame(np.zeros((9, 8), np.uint8)))
    with pytest.raises(ValueError):
        SsimSpec(window=1)
    assert SsimSpec().c1 > 0 and SsimSpec().c2 > 0


def test_ssim_rgb_averages_channels(rng):
    a = rng.integers(0, 256, (10, 10, 3), dtype=np.uint8)
    b = rng.integers(0, 256, (10, 10, 3), dtype=np.uint8)
    expected = np.mean([ssim_windows(a[..., c].tolist(), b[..., c].tolist()) for c in range(3)])
    assert ssim(Frame(a), Frame(b), color_mode="rgb") == pytest.approx(expected, abs=1e-9)


def test_sequence_metric_examples(rng):
    seq = [Frame(rng.integers(0, 256, (8, 8), dtype=np.uint8)) for _ in range(5)]
    other = [Frame(rng.integers(0, 256, (8, 8), dtype=np.uint8)) for _ in range(5)]
    same = sequence_metric(seq, seq, "psnr")
    assert same.per_frame == (100.0,) * 5
    one = sequence_metric(seq[:1], other[:1], "ssim")
    assert one.aggregate == one.per_frame[0]
    five = sequence_metric(seq, other, "psnr")
    assert abs(five.aggregate - math.fsum(five.per_frame) / 5) <= 1e-12
    with pytest.raises(ValueError):
        sequence_metric(seq, other[:4])
