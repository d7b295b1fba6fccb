"""Plate pose from three labelled beacon centroids, and the scene frame derived from it."""

from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from error_logger import log_debug, log_info
from errors import DegenerateGeometry
from geom.camera import CameraModel
from geom.depth_image import DepthImage
from geom.transforms import RigidTransform, kabsch
from calib.beacons import BeaconPlate

SCAN_SAMPLES = 4000


def _unit_rays(centroids, cam: CameraModel):
    rays = cam.ray_directions(centroids[:, 0], centroids[:, 1])
    return rays / np.linalg.norm(rays, axis=1, keepdims=True)


def _partner(s, cos_angle, distance, sign):
    """Range along the second ray for range `s` on the first, given their separation."""
    disc = distance ** 2 - s ** 2 * (1.0 - cos_angle ** 2)
    return s * cos_angle + sign * np.sqrt(np.clip(disc, 0.0, None))


def p3p_solutions(centroids, plate: BeaconPlate, cam: CameraModel) -> List[np.ndarray]:
    """Every camera-frame placement (3, 3) of the beacons consistent with the image rays.

    The range s0 along the first ray is scanned; the other two ranges follow from the
    first two plate distances (two branches each), and roots of the third distance
    constraint are polished with Brent's method.
    """
    rays = _unit_rays(np.asarray(centroids, dtype=float), cam)
    d01, d02, d12 = plate.distances()
    c01, c02 = float(rays[0] @ rays[1]), float(rays[0] @ rays[2])
    s_max = min(d01 / np.sqrt(max(1.0 - c01 ** 2, 1e-300)), d02 / np.sqrt(max(1.0 - c02 ** 2, 1e-300)))
    grid = np.linspace(s_max * 1e-6, s_max, SCAN_SAMPLES)

    solutions = []
    for sign1 in (1.0, -1.0):
        for sign2 in (1.0, -1.0):
            def residual(s):
                s1 = _partner(s, c01, d01, sign1)
                s2 = _partner(s, c02, d02, sign2)
                return float(np.linalg.norm(s1 * rays[1] - s2 * rays[2]) - d12)

            values = np.array([residual(s) for s in grid])
            for k in np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) <= 0)[0]:
                s0 = grid[k] if values[k] == 0 else brentq(residual, grid[k], grid[k + 1], xtol=1e-12)
                s1 = _partner(s0, c01, d01, sign1)
                s2 = _partner(s0, c02, d02, sign2)
                if min(s0, s1, s2) <= 0:
                    continue
                solutions.append(np.array([s0 * rays[0], s1 * rays[1], s2 * rays[2]]))
    return solutions


def _faces_camera(pose: RigidTransform):
    """Plate z axis points back towards the camera origin."""
    return float(pose.rotation[:, 2] @ -pose.translation) > 0.0


def plate_pose(centroids, plate: BeaconPlate, cam: CameraModel, depths: Optional[np.ndarray] = None) -> RigidTransform:
    """cam_H_cal from labelled beacon centroids (3, 2) in continuous pixel coordinates.

    Of the perspective-3-point solutions only those showing the plate's front face are
    kept. Measured beacon depths (camera z, mm) pick among the rest; without them the
    most frontal solution wins.
    """
    centroids = np.asarray(centroids, dtype=float).reshape(3, 2)
    a, b, c = centroids
    if abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])) < 1e-6:
        raise DegenerateGeometry("beacon centroids are collinear")

    measured = None if depths is None else np.asarray(depths, dtype=float)
    if measured is not None and not np.isfinite(measured).any():
        measured = None
    candidates = []
    for placed in p3p_solutions(centroids, plate, cam):
        pose = kabsch(plate.positions, placed)
        if not _faces_camera(pose):
            continue
        if measured is not None:
            cost = float(np.nanmax(np.abs(placed[:, 2] - measured)))
        else:
            view = -pose.translation / np.linalg.norm(pose.translation)
            cost = -float(pose.rotation[:, 2] @ view)
        candidates.append((cost, pose))
    if not candidates:
        raise DegenerateGeometry("no plate pose is consistent with the beacon centroids")

    candidates.sort(key=lambda item: item[0])
    pose = candidates[0][1]
    log_debug(f"plate pose: {len(candidates)} front-facing solutions")
    log_info(f"Plate pose: translation {np.round(pose.translation, 2).tolist()} mm, "
             f"tilt {np.degrees(np.arccos(np.clip(abs(pose.rotation[2, 2]), 0, 1))):.2f} deg")
    return pose


def beacon_depths(depth: DepthImage, centroids, radius=1):
    """Median valid depth around each centroid; NaN where no valid pixel is near."""
    depth.require_kind("depth")
    out = []
    for u, v in np.asarray(centroids, dtype=float):
        col, row = int(np.floor(u)), int(np.floor(v))
        patch = depth.values[max(0, row - radius):row + radius + 1, max(0, col - radius):col + radius + 1]
        finite = patch[np.isfinite(patch)]
        out.append(float(np.median(finite)) if finite.size else np.nan)
    return np.array(out)


def scene_frame_from_plate(cam_H_cal: RigidTransform, cal_H_scene: RigidTransform) -> RigidTransform:
    """cam_H_scene = cam_H_cal . cal_H_scene."""
    return cam_H_cal.compose(cal_H_scene)
