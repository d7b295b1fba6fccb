"""Contrast-enhanced depth images: heights along the scene normal mapped to grey values."""

from typing import Optional, Tuple

import numpy as np

from error_logger import log_debug
from errors import EmptyCloud, InvalidParameter
from geom.cloud import PointCloud
from geom.depth_image import DepthImage, OrthoGrid, rasterize
from geom.transforms import RigidTransform


def make_contrast_depth_image(c: PointCloud, scene_frame: RigidTransform, mm_per_px,
                              origin: Optional[Tuple[float, float]] = None,
                              shape: Optional[Tuple[int, int]] = None,
                              value_range: Optional[Tuple[float, float]] = None) -> DepthImage:
    """Orthographic intensity image of `c` seen along the scene normal.

    `scene_frame` is the scene frame expressed in the cloud's frame (cam_H_scene for a
    camera cloud). Column u runs along scene x and row v along scene y; each pixel keeps
    the highest scene z binned into it, and intensity = (z - lo) / (hi - lo) so the
    foreground is white. Without `value_range`, (lo, hi) are the extreme valid heights; a
    flat scene maps to 1.0 everywhere.
    """
    if c.is_empty():
        raise EmptyCloud("cannot build a contrast image from an empty cloud")
    if not mm_per_px > 0:
        raise InvalidParameter("mm_per_px must be > 0")

    local = scene_frame.inverse().apply_points(c.points)
    heights, origin = rasterize(local[:, 0], local[:, 1], local[:, 2], mm_per_px, keep="max",
                                origin=origin, shape=shape)
    valid = np.isfinite(heights)
    if value_range is None:
        if np.any(valid):
            value_range = (float(heights[valid].min()), float(heights[valid].max()))
        else:
            value_range = (0.0, 0.0)
    grid = OrthoGrid(scene_frame, mm_per_px, origin, value_range)
    intensity = np.full(heights.shape, np.nan)
    intensity[valid] = np.clip(grid.encode(heights[valid]), 0.0, 1.0)
    log_debug(f"contrast image {heights.shape[1]}x{heights.shape[0]} px, "
              f"heights [{value_range[0]:.2f}, {value_range[1]:.2f}] mm")
    return DepthImage(intensity, "intensity", valid, ortho=grid)
