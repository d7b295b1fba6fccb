"""Depth-discontinuity edges."""

import time

import numpy as np
from scipy import ndimage

import config
from error_logger import log_debug
from errors import InvalidParameter
from geom.cloud import PointCloud
from geom.depth_image import DepthImage


def edge_mask(img: DepthImage, min_amplitude):
    """Valid pixels whose 3x3 neighbourhood spans a depth range of at least min_amplitude.

    The range is the largest minus the smallest valid depth around and including the
    pixel, so a step marks both its near and its far side.
    """
    footprint = np.ones((3, 3), dtype=bool)
    highest = ndimage.maximum_filter(np.where(img.mask, img.values, -np.inf), footprint=footprint,
                                     mode="constant", cval=-np.inf)
    lowest = ndimage.minimum_filter(np.where(img.mask, img.values, np.inf), footprint=footprint,
                                    mode="constant", cval=np.inf)
    return img.mask & (highest - lowest >= min_amplitude)


def extract_depth_edges(img: DepthImage, min_amplitude=config.Edges.MIN_AMPLITUDE,
                        frame_id="camera") -> PointCloud:
    """Back-project edge pixels to 3D; each point's normal channel holds its unit viewing direction.

    Perspective images back-project through their camera; orthographic ones through their
    grid, with the projection axis as viewing direction.
    """
    started = time.perf_counter()
    img.require_kind("depth")
    if not min_amplitude > 0:
        raise InvalidParameter("min_amplitude must be > 0")

    rows, cols = np.nonzero(edge_mask(img, min_amplitude))
    depth = img.values[rows, cols]
    if img.camera is not None:
        rays = img.camera.ray_directions(cols + 0.5, rows + 0.5)
        points = rays * depth[:, None]
        view = rays / np.linalg.norm(rays, axis=1, keepdims=True)
    elif img.ortho is not None:
        a, b = img.ortho.grid_xy(cols + 0.5, rows + 0.5)
        points = img.ortho.to_source(a, b, depth)
        axis = img.ortho.source_H_grid.rotation[:, 2]
        view = np.tile(axis, (len(rows), 1))
    else:
        raise InvalidParameter("depth image has neither a camera nor an orthographic grid")

    edges = PointCloud(points.reshape(-1, 3), view.reshape(-1, 3), None, frame_id)
    log_debug(f"extract_depth_edges: {len(edges)} edge points in {time.perf_counter() - started:.4f}s")
    return edges
