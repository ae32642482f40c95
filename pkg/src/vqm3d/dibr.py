"""Horizontal-shift DIBR warping and hierarchical hole filling."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from vqm3d.core import CameraParams, DepthFrame, Frame, check_same_length, check_same_shape, metric_depth


class HoleFillWarning(UserWarning):
    """Raised when a frame has no valid pixel to fill holes from."""


@dataclass(frozen=True, eq=False)
class WarpResult:
    virtual_view: Frame
    hole_mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.hole_mask, dtype=bool)
        if mask.shape != self.virtual_view.shape:
            raise ValueError("hole mask must match the frame dimensions")
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "hole_mask", mask)

    @property
    def hole_count(self) -> int:
        return int(self.hole_mask.sum())


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def disparity(codes, cam: CameraParams) -> np.ndarray:
    """Integer pixel disparity for each depth code."""
    return round_half_away(cam.fb / metric_depth(np.asarray(codes), cam)).astype(np.int64)


def warp_view(reference: Frame, depth: DepthFrame, cam: CameraParams) -> WarpResult:
    """Forward-warp ``reference`` to the virtual camera.

    Source pixel (x, y) lands on (x + side * d, y). When several sources hit
    the same target the nearest one survives; equal depths keep the larger
    source x.
    """
    check_same_shape(reference, depth, "reference and depth")
    h, w = depth.shape
    z = metric_depth(depth.codes, cam)
    d = disparity(depth.codes, cam)

    ys, xs = np.mgrid[0:h, 0:w]
    tx = xs + cam.side * d
    inside = (tx >= 0) & (tx < w)
    ys, xs, tx, z = ys[inside], xs[inside], tx[inside], z[inside]

    target = ys * w + tx
    # primary: target; then nearest depth first; then larger source x first
    order = np.lexsort((-xs, z, target))
    target_sorted = target[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = target_sorted[1:] != target_sorted[:-1]
    win = order[first]

    src = reference.data
    out = np.zeros_like(src)
    hole = np.ones((h, w), dtype=bool)
    out[ys[win], tx[win]] = src[ys[win], xs[win]]
    hole[ys[win], tx[win]] = False
    return WarpResult(Frame(out), hole)


def _reduce(values: np.ndarray, valid: np.ndarray):
    h, w = valid.shape
    ch, cw = (h + 1) // 2, (w + 1) // 2
    pv = np.zeros((2 * ch, 2 * cw) + values.shape[2:], dtype=np.float64)
    pm = np.zeros((2 * ch, 2 * cw), dtype=bool)
    pv[:h, :w] = values
    pm[:h, :w] = valid
    weights = pm.astype(np.float64)
    if values.ndim == 3:
        weighted = pv * weights[:, :, None]
    else:
        weighted = pv * weights
    sums = weighted.reshape(ch, 2, cw, 2, *values.shape[2:]).sum(axis=(1, 3))
    counts = weights.reshape(ch, 2, cw, 2).sum(axis=(1, 3))
    coarse_valid = counts > 0
    safe = np.where(coarse_valid, counts, 1.0)
    coarse = sums / (safe[:, :, None] if values.ndim == 3 else safe)
    return coarse, coarse_valid


def hhf_fill(warped: WarpResult) -> Frame:
    """Fill holes from a hole-aware image pyramid.

    Each coarser level averages the valid pixels of its 2x2 children; a
    coarse pixel is a hole only if all children are holes. Reduction stops
    once a level has no holes (or is 1x1). Holes are then filled top-down
    from the parent pixel. Non-hole pixels are returned unchanged.
    """
    frame, mask = warped.virtual_view, warped.hole_mask
    if not mask.any():
        return frame

    levels = [(frame.data.astype(np.float64), ~mask)]
    while not levels[-1][1].all() and levels[-1][1].shape != (1, 1):
        levels.append(_reduce(*levels[-1]))

    values, valid = levels[-1]
    if not valid.all():
        warnings.warn("frame has no valid pixel; holes filled with 0", HoleFillWarning, stacklevel=2)
        values = np.where(valid if values.ndim == 2 else valid[:, :, None], values, 0.0)

    for fine_values, fine_valid in reversed(levels[:-1]):
        h, w = fine_valid.shape
        parent = values.repeat(2, axis=0).repeat(2, axis=1)[:h, :w]
        keep = fine_valid if fine_values.ndim == 2 else fine_valid[:, :, None]
        values = np.where(keep, fine_values, parent)

    filled = np.clip(np.rint(values), 0, 255).astype(np.uint8)
    out = np.where(mask if filled.ndim == 2 else mask[:, :, None], filled, frame.data)
    return Frame(out)


def render_view(reference: Frame, depth: DepthFrame, cam: CameraParams) -> Frame:
    return hhf_fill(warp_view(reference, depth, cam))


def render_sequence(reference_seq: Sequence[Frame], depth_seq: Sequence[DepthFrame],
                    cam: CameraParams, workers: int = 1) -> List[Frame]:
    check_same_length(reference_seq, depth_seq, "reference and depth sequences")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda pair: render_view(pair[0], pair[1], cam),
                                 zip(reference_seq, depth_seq)))
    return [render_view(r, d, cam) for r, d in zip(reference_seq, depth_seq)]
