"""Point clouds with optional per-point normals and intensities."""

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

import config
from errors import InvalidParameter
from geom.transforms import RigidTransform


class Point3(NamedTuple):
    """A single point in millimetres."""

    x: float
    y: float
    z: float


def _readonly(array, dtype=float):
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered points (N, 3) with optional unit normals (N, 3) and intensities (N,) in [0, 1].

    Edge clouds produced from depth images reuse the normal channel for the unit
    viewing direction of each edge point.
    """

    points: np.ndarray
    normals: Optional[np.ndarray] = None
    intensities: Optional[np.ndarray] = None
    frame_id: str = "camera"

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise InvalidParameter("point coordinates must be finite")
        object.__setattr__(self, "points", _readonly(points))
        n = len(points)

        if self.normals is not None:
            normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
            if len(normals) != n:
                raise InvalidParameter(f"normals has {len(normals)} rows for {n} points")
            lengths = np.linalg.norm(normals, axis=1)
            if n and np.max(np.abs(lengths - 1.0)) > config.Tolerances.UNIT_NORMAL:
                raise InvalidParameter("normals must be unit length")
            object.__setattr__(self, "normals", _readonly(normals))

        if self.intensities is not None:
            intensities = np.asarray(self.intensities, dtype=float).reshape(-1)
            if len(intensities) != n:
                raise InvalidParameter(f"intensities has {len(intensities)} values for {n} points")
            object.__setattr__(self, "intensities", _readonly(intensities))

    def __len__(self):
        return len(self.points)

    @property
    def has_normals(self):
        return self.normals is not None

    @property
    def has_intensities(self):
        return self.intensities is not None

    def is_empty(self):
        return len(self.points) == 0

    def point(self, index) -> Point3:
        return Point3(*map(float, self.points[index]))

    @staticmethod
    def empty(frame_id="camera", with_normals=False, with_intensities=False):
        return PointCloud(np.zeros((0, 3)),
                          np.zeros((0, 3)) if with_normals else None,
                          np.zeros(0) if with_intensities else None,
                          frame_id)

    def select(self, index):
        """Subset by boolean mask or index array; order of retained points is preserved."""
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        return PointCloud(
            self.points[index],
            None if self.normals is None else self.normals[index],
            None if self.intensities is None else self.intensities[index],
            self.frame_id,
        )

    def with_normals(self, normals):
        return PointCloud(self.points, normals, self.intensities, self.frame_id)

    def with_intensities(self, intensities):
        return PointCloud(self.points, self.normals, intensities, self.frame_id)

    def with_frame(self, frame_id):
        return PointCloud(self.points, self.normals, self.intensities, frame_id)

    def bounds(self):
        if self.is_empty():
            return np.zeros(3), np.zeros(3)
        return self.points.min(axis=0), self.points.max(axis=0)

    @staticmethod
    def concat(clouds: Sequence["PointCloud"], frame_id=None):
        """Stack clouds; a channel survives only if every input carries it."""
        clouds = list(clouds)
        if not clouds:
            return PointCloud.empty(frame_id or "camera")
        points = np.vstack([c.points for c in clouds])
        normals = (np.vstack([c.normals for c in clouds])
                   if all(c.has_normals for c in clouds) else None)
        intensities = (np.concatenate([c.intensities for c in clouds])
                       if all(c.has_intensities for c in clouds) else None)
        return PointCloud(points, normals, intensities, frame_id or clouds[0].frame_id)


def apply(t: RigidTransform, c: PointCloud, frame_id: Optional[str] = None) -> PointCloud:
    """Rigidly move a cloud: points rotated and translated, normals rotated, intensities kept."""
    normals = None
    if c.normals is not None:
        normals = t.apply_vectors(c.normals)
        # re-normalise against rounding so the unit invariant keeps holding
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return PointCloud(t.apply_points(c.points), normals, c.intensities,
                      frame_id if frame_id is not None else c.frame_id)
