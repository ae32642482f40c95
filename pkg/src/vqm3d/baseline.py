"""2D reference metrics: PSNR, weighted PSNR and SSIM."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import gaussian_filter

from vqm3d.core import Frame, ScoreSeries, check_same_length

PSNR_CAP_DB = 100.0
PEAK = 255.0


def _planes(frame, color_mode: str) -> np.ndarray:
    if not isinstance(frame, Frame):
        return np.asarray(frame, dtype=np.float64)
    if color_mode == "luma":
        return frame.luma()
    if color_mode == "rgb":
        return frame.samples()
    raise ValueError(f"unknown color mode {color_mode!r}")


def psnr(a, b, color_mode: str = "luma") -> float:
    """10 log10(255^2 / MSE), capped at 100 dB for identical inputs."""
    x, y = _planes(a, color_mode), _planes(b, color_mode)
    if x.shape != y.shape:
        raise ValueError(f"mismatched shapes {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(PEAK * PEAK / mse))


def weighted_psnr(view_scores: Iterable[Tuple[float, float]]) -> float:
    pairs = [(float(s), float(w)) for s, w in view_scores]
    if any(w < 0 for _, w in pairs):
        raise ValueError("weights must be non-negative")
    total = sum(w for _, w in pairs)
    if total <= 0:
        raise ValueError("weights must have a positive sum")
    return sum(s * w for s, w in pairs) / total


@dataclass(frozen=True)
class SsimSpec:
    window: int = 8
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0
    gaussian: bool = False
    sigma: float = 1.5

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be >= 2")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


def _box_mean(x: np.ndarray, n: int) -> np.ndarray:
    """Mean over every n x n window fully inside ``x``."""
    c = np.zeros((x.shape[0] + 1, x.shape[1] + 1))
    c[1:, 1:] = x.cumsum(0).cumsum(1)
    s = c[n:, n:] - c[:-n, n:] - c[n:, :-n] + c[:-n, :-n]
    return s / (n * n)


def _gauss_mean(x: np.ndarray, spec: SsimSpec) -> np.ndarray:
    r = spec.window // 2
    m = gaussian_filter(x, spec.sigma, truncate=r / spec.sigma, mode="nearest")
    return m[r: x.shape[0] - r, r: x.shape[1] - r]


def _ssim_plane(x: np.ndarray, y: np.ndarray, spec: SsimSpec) -> float:
    if spec.gaussian:
        mean = lambda v: _gauss_mean(v, spec)  # noqa: E731
    else:
        mean = lambda v: _box_mean(v, spec.window)  # noqa: E731
    mx, my = mean(x), mean(y)
    vx = mean(x * x) - mx * mx
    vy = mean(y * y) - my * my
    cxy = mean(x * y) - mx * my
    num = (2 * mx * my + spec.c1) * (2 * cxy + spec.c2)
    den = (mx * mx + my * my + spec.c1) * (vx + vy + spec.c2)
    return float(np.mean(num / den))


def ssim(a, b, spec: SsimSpec = SsimSpec(), color_mode: str = "luma") -> float:
    """Mean SSIM over all windows (uniform 8x8, stride 1 by default)."""
    x, y = _planes(a, color_mode), _planes(b, color_mode)
    if x.shape != y.shape:
        raise ValueError(f"mismatched shapes {x.shape} vs {y.shape}")
    if x.shape[0] < spec.window or x.shape[1] < spec.window:
        raise ValueError(f"frame {x.shape[:2]} is smaller than the {spec.window}x{spec.window} window")
    if x.ndim == 3:
        return float(np.mean([_ssim_plane(x[:, :, c], y[:, :, c], spec) for c in range(x.shape[2])]))
    return _ssim_plane(x, y, spec)


METRICS = {"psnr": psnr, "ssim": ssim}


def sequence_metric(seq_a: Sequence, seq_b: Sequence,
                    metric: Union[str, Callable] = "psnr", name: str = None) -> ScoreSeries:
    """Per-frame metric and its arithmetic mean."""
    check_same_length(seq_a, seq_b)
    fn = METRICS[metric] if isinstance(metric, str) else metric
    label = name or (metric if isinstance(metric, str) else getattr(metric, "__name__", "metric"))
    return ScoreSeries(label, tuple(fn(a, b) for a, b in zip(seq_a, seq_b)))
