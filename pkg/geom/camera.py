"""Pinhole depth-camera model. The camera looks along +Z of its own frame."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from errors import InvalidParameter


@dataclass(frozen=True)
class CameraModel:
    """Intrinsics plus the scanning range.

    Pixel (i, j) covers continuous image coordinates [i, i+1) x [j, j+1); its centre is
    (i + 0.5, j + 0.5). `principal_point` is in the same continuous coordinates.
    """

    focal_length_px: float
    principal_point: Tuple[float, float]
    resolution: Tuple[int, int]
    z_range: Tuple[float, float]

    def __post_init__(self):
        if not self.focal_length_px > 0:
            raise InvalidParameter("focal_length_px must be > 0")
        if not self.z_range[0] < self.z_range[1]:
            raise InvalidParameter("z_range min must be < max")
        if self.resolution[0] <= 0 or self.resolution[1] <= 0:
            raise InvalidParameter("resolution must be positive")
        object.__setattr__(self, "principal_point", (float(self.principal_point[0]),
                                                     float(self.principal_point[1])))
        object.__setattr__(self, "resolution", (int(self.resolution[0]), int(self.resolution[1])))
        object.__setattr__(self, "z_range", (float(self.z_range[0]), float(self.z_range[1])))

    @property
    def width(self):
        return self.resolution[0]

    @property
    def height(self):
        return self.resolution[1]

    @staticmethod
    def centered(focal_length_px, width, height, z_range):
        return CameraModel(focal_length_px, (width / 2.0, height / 2.0), (width, height), z_range)

    def project(self, points_cam):
        """Continuous image coordinates (u, v) and depth z of camera-frame points."""
        p = np.asarray(points_cam, dtype=float).reshape(-1, 3)
        z = p[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.focal_length_px * p[:, 0] / z + self.principal_point[0]
            v = self.focal_length_px * p[:, 1] / z + self.principal_point[1]
        return u, v, z

    def ray_directions(self, u, v):
        """Camera-frame ray directions with unit Z component through continuous coordinates."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        x = (u - self.principal_point[0]) / self.focal_length_px
        y = (v - self.principal_point[1]) / self.focal_length_px
        return np.stack([x, y, np.ones_like(x)], axis=-1)

    def pixel_rays(self):
        """(H, W, 3) rays through every pixel centre."""
        jj, ii = np.mgrid[0:self.height, 0:self.width]
        return self.ray_directions(ii + 0.5, jj + 0.5)

    def back_project(self, u, v, z):
        """Camera-frame points at depth z along the rays through (u, v)."""
        return self.ray_directions(u, v) * np.asarray(z, dtype=float)[..., None]

    def in_range(self, z):
        z = np.asarray(z, dtype=float)
        return (z >= self.z_range[0]) & (z <= self.z_range[1])

    def to_dict(self):
        return {
            "focal_length_px": self.focal_length_px,
            "principal_point": list(self.principal_point),
            "resolution": list(self.resolution),
            "z_range": list(self.z_range),
        }

    @staticmethod
    def from_dict(data):
        return CameraModel(float(data["focal_length_px"]), tuple(data["principal_point"]),
                           tuple(data["resolution"]), tuple(data["z_range"]))
