"""Full-reference quality assessment for depth-image-based-rendered 3D video."""

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

__all__ = [
    "CameraParams",
    "DepthFrame",
    "Frame",
    "ScoreSeries",
    "VqmConstants",
    "depth_code",
    "metric_depth",
    "normalize_depth",
]

__version__ = "0.1.0"
