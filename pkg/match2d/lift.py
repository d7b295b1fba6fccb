"""Lifting a planar (u, v, theta) match to a 6D pose in the scene frame."""

import time

import numpy as np
from scipy import ndimage

import config
from error_logger import log_debug
from errors import InsufficientDepthPixels, InvalidParameter
from geom.depth_image import DepthImage
from geom.transforms import RigidTransform, rotation_between
from match2d.shape_match import PlanarMatch
from match2d.templates import rotation_cos_sin
from match3d.results import MatchResult
from match3d.workpiece import WorkpieceModel, points_in_polygon
from refine.planes import Plane


def part_pixels(pm: PlanarMatch, img: DepthImage, m: WorkpieceModel, erode=1):
    """Boolean mask of the pixels whose centres fall inside the posed outline.

    The mask is eroded by `erode` pixels so that edge pixels, which mix part and
    background heights, are left out.
    """
    grid = img.ortho
    c, s = rotation_cos_sin(pm.theta)
    reach = m.diameter / grid.mm_per_px + 2
    r0 = max(0, int(np.floor(pm.v - reach)))
    r1 = min(img.height, int(np.ceil(pm.v + reach)) + 1)
    c0 = max(0, int(np.floor(pm.u - reach)))
    c1 = min(img.width, int(np.ceil(pm.u + reach)) + 1)
    mask = np.zeros(img.values.shape, dtype=bool)
    if r0 >= r1 or c0 >= c1:
        return mask
    rows, cols = np.mgrid[r0:r1, c0:c1]
    x = (cols + 0.5 - pm.u) * grid.mm_per_px
    y = (rows + 0.5 - pm.v) * grid.mm_per_px
    local = np.column_stack([c * x.ravel() + s * y.ravel(), -s * x.ravel() + c * y.ravel()]) + m.centroid
    window = points_in_polygon(local, m.outline).reshape(rows.shape)
    if erode:
        window = ndimage.binary_erosion(window, iterations=erode)
    mask[r0:r1, c0:c1] = window
    return mask


def lift_to_6d(pm: PlanarMatch, img: DepthImage, support: Plane, m: WorkpieceModel) -> MatchResult:
    """Model->scene pose from a planar match on a contrast image.

    In-plane position and rotation come from the match, the top-face height from the
    median height of the valid part pixels, and the tilt from the support plane normal.
    """
    started = time.perf_counter()
    img.require_kind("intensity")
    if img.ortho is None or img.ortho.value_range is None:
        raise InvalidParameter("lifting needs an orthographic contrast image with a value range")
    if pm.model_id and pm.model_id != m.id:
        raise InvalidParameter(f"match is for '{pm.model_id}', model is '{m.id}'")

    pixels = part_pixels(pm, img, m) & img.mask
    count = int(pixels.sum())
    if count < config.Lift.MIN_PIXELS:
        raise InsufficientDepthPixels(
            f"{count} valid part pixels under '{m.id}', need {config.Lift.MIN_PIXELS}")
    top = float(np.median(img.ortho.decode(img.values[pixels])))

    a, b = img.ortho.grid_xy(pm.u, pm.v)
    c, s = rotation_cos_sin(pm.theta)
    spin = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    rotation = rotation_between([0.0, 0.0, 1.0], support.normal) @ spin
    anchor = np.array([m.centroid[0], m.centroid[1], m.thickness])
    translation = np.array([float(a), float(b), top]) - rotation @ anchor
    pose = RigidTransform(rotation, translation)

    duration = time.perf_counter() - started
    log_debug(f"lifted '{m.id}': top face at {top:.2f} mm from {count} pixels")
    return MatchResult(m.id, pose, float(pm.score), duration)
