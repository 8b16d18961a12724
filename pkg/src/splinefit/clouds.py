"""Small helpers for unordered point clouds (plain (N, 3) float arrays)."""

import numpy as np

from .errors import ConfigurationError


def as_cloud(points):
    """Validate and return ``points`` as an (N, 3) float64 array."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ConfigurationError(f"point cloud must be (N, 3), got {pts.shape}")
    if pts.shape[0] < 1:
        raise ConfigurationError("point cloud is empty")
    if not np.all(np.isfinite(pts)):
        raise ConfigurationError("point cloud contains non-finite coordinates")
    return pts


def unit_cube_frame(cloud):
    """Translation and scale mapping ``cloud`` into the unit cube.

    Returns ``(shift, scale)`` such that ``(cloud - shift) / scale`` lies in
    [0, 1]^3 with the longest bounding-box side mapped to length 1 (aspect
    ratio preserved).
    """
    cloud = as_cloud(cloud)
    lo = cloud.min(axis=0)
    scale = float((cloud.max(axis=0) - lo).max())
    if scale < 1e-12:
        raise ConfigurationError("cloud has no spatial extent")
    return lo, scale
