"""Blur, block-DCT compression proxy and Gilbert-Elliot frame loss."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy.fft import dctn, idctn
from scipy.ndimage import convolve1d

from vqm3d.core import DepthFrame, Frame

Picture = Union[Frame, DepthFrame]

LOSS_POLICIES = ("zero", "freeze")
BLOCK = 8
# DC is quantized no coarser than this so flat areas keep their level (within 1 code) at any QP
MAX_DC_STEP = 8.0


@dataclass(frozen=True)
class BlurSpec:
    kernel_size: int
    sigma: float

    def __post_init__(self):
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def kernel(self) -> np.ndarray:
        r = self.kernel_size // 2
        x = np.arange(-r, r + 1, dtype=np.float64)
        k = np.exp(-0.5 * (x / self.sigma) ** 2)
        return k / k.sum()


@dataclass(frozen=True)
class CompressSpec:
    qp: int

    def __post_init__(self):
        if int(self.qp) != self.qp or not 0 <= self.qp <= 51:
            raise ValueError("qp must be an integer in [0, 51]")

    @property
    def step(self) -> float:
        # H.264 law: step doubles every 6 QP, step(4) == 1
        return 2.0 ** ((self.qp - 4) / 6.0)


@dataclass(frozen=True)
class ChannelSpec:
    p_good_to_bad: float
    p_bad_to_good: float
    seed: int = 0

    def __post_init__(self):
        for name in ("p_good_to_bad", "p_bad_to_good"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be a probability")

    @property
    def stationary_loss_rate(self) -> float:
        total = self.p_good_to_bad + self.p_bad_to_good
        if total == 0:
            return 0.0
        return self.p_good_to_bad / total


def _planes(pic: Picture) -> np.ndarray:
    return pic.codes if isinstance(pic, DepthFrame) else pic.data


def _rebuild(pic: Picture, arr: np.ndarray, chroma=None) -> Picture:
    if isinstance(pic, DepthFrame):
        return DepthFrame.from_float(arr)
    return Frame.from_float(arr, chroma)


def _blur_plane(plane: np.ndarray, k: np.ndarray) -> np.ndarray:
    x = plane.astype(np.float64)
    x = convolve1d(x, k, axis=0, mode="nearest")
    return convolve1d(x, k, axis=1, mode="nearest")


def _per_plane(pic: Picture, fn) -> Picture:
    data = _planes(pic)
    if data.ndim == 3:
        out = np.stack([fn(data[:, :, c]) for c in range(data.shape[2])], axis=2)
    else:
        out = fn(data)
    chroma = None
    if isinstance(pic, Frame) and pic.chroma is not None:
        chroma = tuple(np.clip(np.rint(fn(p)), 0, 255).astype(np.uint8) for p in pic.chroma)
    return _rebuild(pic, out, chroma)


def gaussian_blur(frame: Picture, spec: BlurSpec) -> Picture:
    """Separable Gaussian blur with edge replication; works on frames and depth."""
    if spec.kernel_size == 1:
        return frame
    k = spec.kernel()
    return _per_plane(frame, lambda p: _blur_plane(p, k))


def _compress_plane(plane: np.ndarray, step: float) -> np.ndarray:
    h, w = plane.shape
    ph, pw = -h % BLOCK, -w % BLOCK
    x = np.pad(plane.astype(np.float64), ((0, ph), (0, pw)), mode="edge")
    bh, bw = x.shape[0] // BLOCK, x.shape[1] // BLOCK
    blocks = x.reshape(bh, BLOCK, bw, BLOCK).transpose(0, 2, 1, 3)
    coef = dctn(blocks, axes=(2, 3), norm="ortho")
    steps = np.full((BLOCK, BLOCK), step)
    steps[0, 0] = min(step, MAX_DC_STEP)
    coef = np.rint(coef / steps) * steps
    rec = idctn(coef, axes=(2, 3), norm="ortho")
    rec = rec.transpose(0, 2, 1, 3).reshape(bh * BLOCK, bw * BLOCK)
    return rec[:h, :w]


def compress_proxy(frame: Picture, spec: CompressSpec) -> Picture:
    """Intra-only 8x8 block-DCT quantization standing in for a real encoder."""
    step = spec.step
    return _per_plane(frame, lambda p: _compress_plane(p, step))


def make_channel_for_rate(target_rate: float, mean_burst_length: float, seed: int = 0) -> ChannelSpec:
    """Markov parameters whose stationary loss rate is exactly ``target_rate``."""
    if not 0.0 < target_rate < 1.0:
        raise ValueError("target_rate must lie strictly between 0 and 1")
    if mean_burst_length < 1.0:
        raise ValueError("mean_burst_length must be >= 1")
    p_bg = 1.0 / mean_burst_length
    p_gb = target_rate * p_bg / (1.0 - target_rate)
    if p_gb > 1.0:
        raise ValueError("target_rate too high for this burst length (p_good_to_bad > 1)")
    return ChannelSpec(p_gb, p_bg, seed)


def loss_mask(n_frames: int, spec: ChannelSpec) -> np.ndarray:
    """Which of ``n_frames`` packets are lost.

    The chain starts in Good and advances once before each frame; a frame
    sent in Bad is lost. One uniform draw per frame decides the next state:
    Bad iff u < P(Bad | current). For a shared seed and p_bad_to_good,
    raising p_good_to_bad only adds losses, provided every chain involved
    has p_good_to_bad <= 1 - p_bad_to_good.
    """
    u = np.random.default_rng(spec.seed).random(n_frames)
    stay_bad = 1.0 - spec.p_bad_to_good
    go_bad = spec.p_good_to_bad
    mask = np.zeros(n_frames, dtype=bool)
    bad = False
    for i in range(n_frames):
        bad = u[i] < (stay_bad if bad else go_bad)
        mask[i] = bad
    return mask


def _blank_like(pic: Picture) -> Picture:
    if isinstance(pic, DepthFrame):
        return DepthFrame(np.zeros_like(pic.codes))
    chroma = None
    if pic.chroma is not None:
        chroma = tuple(np.zeros_like(p) for p in pic.chroma)
    return Frame(np.zeros_like(pic.data), chroma)


def apply_loss(seq: Sequence[Picture], mask: np.ndarray, loss_policy: str = "zero") -> List[Picture]:
    if loss_policy not in LOSS_POLICIES:
        raise ValueError(f"unknown loss policy {loss_policy!r}; expected one of {LOSS_POLICIES}")
    out: List[Picture] = []
    for pic, lost in zip(seq, mask):
        if not lost:
            out.append(pic)
        elif loss_policy == "freeze" and out:
            out.append(out[-1])
        else:
            out.append(_blank_like(pic))
    return out


def gilbert_elliot_loss(seq: Sequence[Picture], spec: ChannelSpec,
                        loss_policy: str = "zero") -> Tuple[List[Picture], np.ndarray]:
    """Send each frame as one packet through a two-state loss channel.

    Lost frames become all-zero (``zero``) or repeat the previous output
    frame (``freeze``; a loss at frame 0 still yields zeros). No other
    concealment is attempted.
    """
    if not len(seq):
        raise ValueError("empty sequence")
    mask = loss_mask(len(seq), spec)
    return apply_loss(seq, mask, loss_policy), mask
