"""Domain types shared by every stage of the pipeline.

Frames are stored as 8-bit numpy arrays and are read-only once constructed.
All arithmetic on them happens in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

# ITU-R BT.601 luma weights, used when a tri-channel frame has to be reduced.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def _as_uint8(arr, name: str) -> np.ndarray:
    a = np.asarray(arr)
    if a.dtype != np.uint8:
        if a.size and (np.nanmin(a) < 0 or np.nanmax(a) > 255):
            raise ValueError(f"{name} values must lie in [0, 255]")
        if not np.all(np.isfinite(a)) or not np.all(a == np.round(a)):
            raise ValueError(f"{name} values must be integral; use from_float() to round")
        a = a.astype(np.uint8)
    a = np.ascontiguousarray(a)
    if a.flags.writeable:
        a = a.copy()
        a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Frame:
    """One picture: ``data`` has shape (H, W) or (H, W, 3).

    ``chroma`` optionally carries the two subsampled planes of a 4:2:0
    source so that they survive a load/store round trip.
    """

    data: np.ndarray
    chroma: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        data = _as_uint8(self.data, "Frame")
        if data.ndim == 3 and data.shape[2] == 1:
            data = data[:, :, 0]
        if data.ndim not in (2, 3) or (data.ndim == 3 and data.shape[2] != 3):
            raise ValueError(f"Frame must be (H, W) or (H, W, 3), got {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("Frame must have at least one pixel")
        object.__setattr__(self, "data", data)
        if self.chroma is not None:
            if data.ndim != 2:
                raise ValueError("chroma planes only accompany single-channel luma")
            cb, cr = (_as_uint8(p, "chroma") for p in self.chroma)
            expected = ((data.shape[0] + 1) // 2, (data.shape[1] + 1) // 2)
            if cb.shape != expected or cr.shape != expected:
                raise ValueError(f"chroma planes must be {expected}, got {cb.shape}, {cr.shape}")
            object.__setattr__(self, "chroma", (cb, cr))

    @classmethod
    def from_float(cls, arr, chroma=None) -> "Frame":
        """Round and clip a real-valued array into an 8-bit frame."""
        return cls(np.clip(np.rint(np.asarray(arr, dtype=np.float64)), 0, 255).astype(np.uint8), chroma)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape[:2]

    def luma(self) -> np.ndarray:
        """Float64 luma plane in code units [0, 255]."""
        if self.data.ndim == 2:
            return self.data.astype(np.float64)
        return self.data.astype(np.float64) @ np.asarray(LUMA_WEIGHTS)

    def samples(self) -> np.ndarray:
        return self.data.astype(np.float64)

    def equals(self, other: "Frame") -> bool:
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))


@dataclass(frozen=True, eq=False)
class DepthFrame:
    """Per-pixel 8-bit inverse-depth codes (255 = nearest, 0 = farthest)."""

    codes: np.ndarray

    def __post_init__(self):
        codes = _as_uint8(self.codes, "DepthFrame")
        if codes.ndim != 2 or codes.shape[0] < 1 or codes.shape[1] < 1:
            raise ValueError(f"DepthFrame must be a non-empty (H, W) grid, got {codes.shape}")
        object.__setattr__(self, "codes", codes)

    @classmethod
    def from_float(cls, arr) -> "DepthFrame":
        return cls(np.clip(np.rint(np.asarray(arr, dtype=np.float64)), 0, 255).astype(np.uint8))

    @property
    def height(self) -> int:
        return self.codes.shape[0]

    @property
    def width(self) -> int:
        return self.codes.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.codes.shape

    def metric(self, cam: "CameraParams") -> np.ndarray:
        return metric_depth(self.codes, cam)

    def equals(self, other: "DepthFrame") -> bool:
        return self.codes.shape == other.codes.shape and bool(np.array_equal(self.codes, other.codes))


@dataclass(frozen=True)
class CameraParams:
    """Rectified stereo set-up plus the depth quantization range.

    ``side`` is +1 when the rendered view lies to the right of the
    reference and -1 when it lies to the left.
    """

    focal_length: float = 500.0
    baseline: float = 0.05
    side: int = 1
    alpha: float = 120.0
    z_near: float = 0.3
    z_far: float = 10.0

    def __post_init__(self):
        if self.side not in (1, -1):
            raise ValueError("side must be +1 (right) or -1 (left)")
        if not 0 < self.z_near < self.z_far:
            raise ValueError("require 0 < z_near < z_far")
        if self.focal_length <= 0 or self.baseline <= 0:
            raise ValueError("focal_length and baseline must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    @property
    def fb(self) -> float:
        """Focal length times baseline: disparity in pixels is ``fb / Z``."""
        return self.focal_length * self.baseline

    @property
    def depth_range(self) -> float:
        return self.z_far - self.z_near


@dataclass(frozen=True)
class VqmConstants:
    K: float = 5.0
    a: int = 8
    b: int = 8
    c: int = 6

    def __post_init__(self):
        if self.K <= 0:
            raise ValueError("K must be positive")
        for name in ("a", "b", "c"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"exponent {name} must be a positive integer")


@dataclass(frozen=True)
class ScoreSeries:
    metric_name: str
    per_frame: Tuple[float, ...]
    aggregate: float = field(init=False)

    def __post_init__(self):
        values = tuple(float(v) for v in self.per_frame)
        if not values:
            raise ValueError("ScoreSeries needs at least one frame")
        object.__setattr__(self, "per_frame", values)
        object.__setattr__(self, "aggregate", float(np.mean(values)))

    def __len__(self):
        return len(self.per_frame)


def metric_depth(v, cam: CameraParams):
    """Map 8-bit inverse-depth codes to metres.

    1/Z = (v/255) * (1/z_near - 1/z_far) + 1/z_far, so code 255 is z_near
    and code 0 is z_far. Works on scalars and arrays.
    """
    v = np.asarray(v, dtype=np.float64)
    inv = (v / 255.0) * (1.0 / cam.z_near - 1.0 / cam.z_far) + 1.0 / cam.z_far
    z = 1.0 / inv
    return float(z) if z.ndim == 0 else z


def depth_code(z, cam: CameraParams):
    """Inverse of :func:`metric_depth`, rounded to the nearest 8-bit code."""
    z = np.clip(np.asarray(z, dtype=np.float64), cam.z_near, cam.z_far)
    v = 255.0 * (1.0 / z - 1.0 / cam.z_far) / (1.0 / cam.z_near - 1.0 / cam.z_far)
    v = np.clip(np.rint(v), 0, 255).astype(np.uint8)
    return int(v) if v.ndim == 0 else v


def normalize_depth(depth) -> np.ndarray:
    """Depth codes scaled to [0, 1] as float64."""
    codes = depth.codes if isinstance(depth, DepthFrame) else np.asarray(depth)
    return codes.astype(np.float64) / 255.0


def check_same_shape(a, b, what: str = "frames") -> None:
    sa, sb = tuple(a.shape[:2]), tuple(b.shape[:2])
    if sa != sb:
        raise ValueError(f"{what} have mismatched dimensions: {sa} vs {sb}")


def check_same_length(a: Sequence, b: Sequence, what: str = "sequences") -> None:
    if len(a) != len(b):
        raise ValueError(f"{what} have different lengths: {len(a)} vs {len(b)}")
