"""Small textured stereo scenes with known depth, for tests and demos."""

from __future__ import annotations

from typing import List, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from vqm3d.core import CameraParams, DepthFrame, Frame, depth_code

# Scene-appropriate quantization range: the fixture spans roughly 0.5 m to 0.9 m,
# giving disparities of about 11 to 20 pixels.
FIXTURE_CAMERA = CameraParams(focal_length=200.0, baseline=0.05, side=1, alpha=120.0, z_near=0.1, z_far=2.0)


def _texture(h: int, w: int, rng: np.random.Generator, smooth: float, lo: float, hi: float) -> np.ndarray:
    t = gaussian_filter(rng.standard_normal((h, w)), smooth, mode="wrap")
    t = (t - t.min()) / max(np.ptp(t), 1e-12)
    return lo + (hi - lo) * t


def make_scene(width: int = 64, height: int = 64, frames: int = 10, seed: int = 0,
               static: bool = False, period: int = 96, texture_scale: float = 2.5,
               cam: CameraParams = FIXTURE_CAMERA) -> Tuple[List[Frame], List[DepthFrame]]:
    """A textured slanted plane with a smooth textured blob swinging in front of it.

    Depth is piecewise smooth at a scale well above a 7x7 kernel, like the
    simple structure of captured depth maps. The blob oscillates
    horizontally with the given ``period`` in frames; ``static`` freezes it
    so every frame is identical.
    """
    rng = np.random.default_rng(seed)
    bg = _texture(height, width, rng, texture_scale, 40.0, 215.0)
    fg = _texture(height, width, rng, texture_scale, 60.0, 240.0)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    plane = 0.9 - 0.2 * yy / max(height - 1, 1)
    blob_z = 0.5
    spread = min(width, height) * 0.14
    swing = width * 0.15

    colors, depths = [], []
    for k in range(frames):
        t = 0.0 if static else swing * np.sin(2.0 * np.pi * k / period)
        w_in = np.exp(-0.5 * ((xx - width * 0.5 - t) ** 2 + (yy - height * 0.5) ** 2) / spread ** 2)
        fg_tex = np.roll(fg, int(round(t)), axis=1)
        color = (1.0 - w_in) * bg + w_in * fg_tex
        inv_z = (1.0 - w_in) / plane + w_in / blob_z
        colors.append(Frame.from_float(color))
        depths.append(DepthFrame(depth_code(1.0 / inv_z, cam)))
    return colors, depths
