"""Synthetic captures of the beacon plate: intensity image with three bright blobs plus depth."""

import numpy as np

import config
from calib.beacons import BeaconPlate
from geom.camera import CameraModel
from geom.depth_image import DepthImage
from geom.transforms import RigidTransform

PLATE_MARGIN = 40.0


def render_beacon_plate(plate: BeaconPlate, cam: CameraModel, cam_H_cal: RigidTransform,
                        sigma_px=config.Synth.BEACON_SIGMA_PX, peak=config.Synth.BEACON_PEAK,
                        albedo=config.Synth.PLATE_ALBEDO, margin=PLATE_MARGIN):
    """(intensity image, depth image) of the plate seen from `cam_H_cal`.

    The plate is the beacons' bounding rectangle grown by `margin` mm. Each beacon is a
    Gaussian spot of `sigma_px` pixels centred on its projection, blended from the plate
    albedo up to `peak`. The background beyond the plate is black and has no depth.
    """
    rays = cam.pixel_rays()
    cal_H_cam = cam_H_cal.inverse()
    origin = cal_H_cam.translation
    dirs = cal_H_cam.apply_vectors(rays.reshape(-1, 3))

    with np.errstate(divide="ignore", invalid="ignore"):
        t = -origin[2] / dirs[:, 2]
    on_plane = origin[None, :] + t[:, None] * dirs
    lo = plate.positions[:, :2].min(axis=0) - margin
    hi = plate.positions[:, :2].max(axis=0) + margin
    on_plate = ((np.abs(dirs[:, 2]) > 1e-15) & (t > 0) & np.all(on_plane[:, :2] >= lo, axis=1)
                & np.all(on_plane[:, :2] <= hi, axis=1) & cam.in_range(np.where(t > 0, t, -1.0)))
    on_plate = on_plate.reshape(cam.height, cam.width)

    u, v, _ = cam.project(cam_H_cal.apply_points(plate.positions))
    rows, cols = np.mgrid[0:cam.height, 0:cam.width]
    spots = np.zeros((cam.height, cam.width))
    for cu, cv in zip(u, v):
        r2 = (cols + 0.5 - cu) ** 2 + (rows + 0.5 - cv) ** 2
        spots = np.maximum(spots, np.exp(-r2 / (2.0 * sigma_px ** 2)))

    intensity = np.where(on_plate, albedo * (1.0 - spots) + peak * spots, 0.0)
    depth = np.where(on_plate, t.reshape(cam.height, cam.width), np.nan)
    return (DepthImage(intensity, "intensity", camera=cam),
            DepthImage(depth, "depth", camera=cam))
