"""The 3VQM score: ideal depth, depth-error statistics and their combination.

Depth errors are expressed in metres divided by (z_far - z_near), so every
standard deviation below is dimensionless and, after clamping, lies in
[0, 1]. STD is always the population standard deviation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from vqm3d.core import (
    CameraParams,
    DepthFrame,
    Frame,
    ScoreSeries,
    VqmConstants,
    check_same_length,
    check_same_shape,
    metric_depth,
    normalize_depth,
)

DEFAULT_THRESHOLD = 0.05
INTERSECTION_MODES = ("masked", "min", "overlap")


@dataclass(frozen=True)
class FrameDistortions:
    so: float
    to: float
    ti: float
    so_cap_to: float
    vqm: float


def _clamp01(x: float) -> float:
    return float(min(max(x, 0.0), 1.0))


def _std(x) -> float:
    return float(np.std(np.asarray(x, dtype=np.float64)))


def _luma(x) -> np.ndarray:
    return x.luma() if isinstance(x, Frame) else np.asarray(x, dtype=np.float64)


def ideal_depth(I_o, I_v, Z: DepthFrame, cam: CameraParams, intensity_scale: float = 255.0) -> np.ndarray:
    """Per-pixel depth that would have rendered the distortion-free view.

    Z_ideal = s*F*B / (alpha * dI + s*F*B / Z_m) with dI = (I_o - I_v) /
    intensity_scale. Denominators closer to zero than 1e-9*F*B are pushed
    out to that magnitude. A non-positive result means the implied
    disparity lies beyond infinity and maps to z_far; everything else is
    clipped to [z_near, z_far].
    """
    io, iv = _luma(I_o), _luma(I_v)
    check_same_shape(io, iv, "I_o and I_v")
    check_same_shape(io, Z, "intensities and depth")
    fb = cam.fb
    s = cam.side
    zm = metric_depth(Z.codes, cam)
    den = cam.alpha * (io - iv) / intensity_scale + s * fb / zm
    eps = 1e-9 * fb
    small = np.abs(den) < eps
    if small.any():
        sign = np.where(den[small] != 0, np.sign(den[small]), s)
        den = den.copy()
        den[small] = sign * eps
    z = s * fb / den
    return np.where(z > 0, np.clip(z, cam.z_near, cam.z_far), cam.z_far)


def delta_z(z_ideal, Z: DepthFrame, cam: CameraParams) -> np.ndarray:
    """Normalized depth error (Z_ideal - Z_received) / (z_far - z_near)."""
    z_ideal = np.asarray(z_ideal, dtype=np.float64)
    check_same_shape(z_ideal, Z, "ideal and received depth")
    return (z_ideal - metric_depth(Z.codes, cam)) / cam.depth_range


def spatial_outliers(dz) -> float:
    dz = np.asarray(dz, dtype=np.float64)
    if dz.size == 0:
        raise ValueError("empty depth-error field")
    return _clamp01(_std(dz))


def temporal_outliers(dz_k, dz_prev) -> float:
    dz_k, dz_prev = np.asarray(dz_k, np.float64), np.asarray(dz_prev, np.float64)
    check_same_shape(dz_k, dz_prev, "depth-error fields")
    return _clamp01(_std(dz_k - dz_prev))


def temporal_inconsistency(Z_k: DepthFrame, Z_prev: DepthFrame) -> float:
    check_same_shape(Z_k, Z_prev, "depth frames")
    return _clamp01(_std(normalize_depth(Z_k) - normalize_depth(Z_prev)))


def so_intersection_term(dz_k, dz_prev, outlier_threshold: float = DEFAULT_THRESHOLD,
                         mode: str = "masked") -> float:
    """Statistic over pixels that are both spatial and temporal outliers.

    ``masked`` (default): STD of dz_k restricted to pixels where
    |dz_k| and |dz_k - dz_prev| both exceed the threshold; 0 when fewer
    than two pixels qualify. ``min`` returns min(SO, TO) and ``overlap``
    the fraction of pixels in the joint mask.
    """
    dz_k, dz_prev = np.asarray(dz_k, np.float64), np.asarray(dz_prev, np.float64)
    check_same_shape(dz_k, dz_prev, "depth-error fields")
    if mode == "min":
        return min(spatial_outliers(dz_k), temporal_outliers(dz_k, dz_prev))
    joint = (np.abs(dz_k) > outlier_threshold) & (np.abs(dz_k - dz_prev) > outlier_threshold)
    if mode == "overlap":
        return float(joint.mean())
    if mode != "masked":
        raise ValueError(f"unknown intersection mode {mode!r}; expected one of {INTERSECTION_MODES}")
    if joint.sum() < 2:
        return 0.0
    return _clamp01(_std(dz_k[joint]))


def combine(so: float, so_cap_to: float, ti: float, to: float,
            consts: VqmConstants = VqmConstants()) -> float:
    """K (1 - SO * SO_cap_TO)^a (1 - TI)^b (1 - TO)^c."""
    for name, v in (("so", so), ("so_cap_to", so_cap_to), ("ti", ti), ("to", to)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v!r} outside [0, 1]")
    return float(consts.K
                 * (1.0 - so * so_cap_to) ** consts.a
                 * (1.0 - ti) ** consts.b
                 * (1.0 - to) ** consts.c)


def frame_distortions(dz_k, dz_prev, Z_k: DepthFrame, Z_prev: DepthFrame,
                      consts: VqmConstants = VqmConstants(),
                      threshold: float = DEFAULT_THRESHOLD, mode: str = "masked") -> FrameDistortions:
    so = spatial_outliers(dz_k)
    if dz_prev is None:
        to = ti = cap = 0.0
    else:
        to = temporal_outliers(dz_k, dz_prev)
        ti = temporal_inconsistency(Z_k, Z_prev)
        cap = so_intersection_term(dz_k, dz_prev, threshold, mode)
    return FrameDistortions(so, to, ti, cap, combine(so, cap, ti, to, consts))


def score_frames(reference_seq: Sequence, rendered_seq: Sequence, depth_seq: Sequence[DepthFrame],
                 cam: CameraParams, consts: VqmConstants = VqmConstants(),
                 threshold: float = DEFAULT_THRESHOLD, mode: str = "masked",
                 intensity_scale: float = 255.0) -> List[FrameDistortions]:
    """Per-frame distortion terms; frame 0 has no predecessor so its temporal terms are 0."""
    check_same_length(reference_seq, rendered_seq, "reference and rendered sequences")
    check_same_length(reference_seq, depth_seq, "reference and depth sequences")
    if len(reference_seq) < 2:
        raise ValueError("3VQM needs at least two frames for its temporal terms")
    out = []
    dz_prev = None
    for k, (io, iv, z) in enumerate(zip(reference_seq, rendered_seq, depth_seq)):
        dz = delta_z(ideal_depth(io, iv, z, cam, intensity_scale), z, cam)
        out.append(frame_distortions(dz, dz_prev, z, depth_seq[k - 1] if k else None, consts, threshold, mode))
        dz_prev = dz
    return out


def score_sequence(reference_seq: Sequence, rendered_seq: Sequence, depth_seq: Sequence[DepthFrame],
                   cam: CameraParams, consts: VqmConstants = VqmConstants(),
                   threshold: float = DEFAULT_THRESHOLD, mode: str = "masked",
                   intensity_scale: float = 255.0) -> ScoreSeries:
    """3VQM per frame plus the sequence mean.

    ``reference_seq`` is the distortion-free virtual view, ``rendered_seq``
    the view synthesized from the received data and ``depth_seq`` the
    received depth.
    """
    terms = score_frames(reference_seq, rendered_seq, depth_seq, cam, consts, threshold, mode, intensity_scale)
    return ScoreSeries("3vqm", tuple(t.vqm for t in terms))
