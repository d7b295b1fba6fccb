"""Background-removal filters.

Every filter returns (subset of the input in original order, FilterReport).
"""

import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

import config
from errors import InvalidParameter, MissingChannel, TooFewPoints
from geom.cloud import PointCloud
from geom.neighbors import NeighborIndex
from geom.transforms import RigidTransform
from refine.report import finish


@dataclass(frozen=True, eq=False)
class ExclusionBox:
    """Axis-aligned box in its own frame; `frame` maps box coordinates into the cloud frame."""

    frame: RigidTransform
    min_corner: Sequence[float]
    max_corner: Sequence[float]

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=float).reshape(3)
        hi = np.asarray(self.max_corner, dtype=float).reshape(3)
        if np.any(lo > hi):
            raise InvalidParameter("box min_corner must be <= max_corner")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    def contains(self, points):
        local = self.frame.inverse().apply_points(points)
        return np.all((local >= self.min_corner) & (local <= self.max_corner), axis=1)

    def to_dict(self):
        return {"frame": self.frame.to_list(), "min_corner": self.min_corner.tolist(),
                "max_corner": self.max_corner.tolist()}

    @staticmethod
    def from_dict(data):
        frame = RigidTransform.from_list(data["frame"]) if "frame" in data else RigidTransform.identity()
        return ExclusionBox(frame, data["min_corner"], data["max_corner"])


def z_band_filter(c: PointCloud, frame: RigidTransform, z_min, z_max):
    """Keep p iff z_min <= (frame^-1 . p).z <= z_max; `frame` is given in the cloud's frame."""
    started = time.perf_counter()
    if not z_min < z_max:
        raise InvalidParameter("z_min must be < z_max")
    z = frame.inverse().apply_points(c.points)[:, 2] if len(c) else np.zeros(0)
    keep = (z >= z_min) & (z <= z_max)
    return finish("z_band", c, keep, started, z_min=float(z_min), z_max=float(z_max))


def intensity_filter(c: PointCloud, lo, hi):
    """Grey-value thresholding: keep p iff lo <= intensity(p) <= hi."""
    started = time.perf_counter()
    if not c.has_intensities:
        raise MissingChannel("intensities")
    if lo > hi:
        raise InvalidParameter("lo must be <= hi")
    keep = (c.intensities >= lo) & (c.intensities <= hi)
    return finish("intensity", c, keep, started, lo=float(lo), hi=float(hi))


def normal_direction_filter(c: PointCloud, axis, max_angle, signed=False):
    """Keep points whose normal lies within max_angle degrees of axis.

    The test is on |cos| unless `signed`, so opposite normal conventions both pass.
    """
    started = time.perf_counter()
    if not c.has_normals:
        raise MissingChannel("normals")
    axis = np.asarray(axis, dtype=float).reshape(3)
    axis = axis / np.linalg.norm(axis)
    cos = c.normals @ axis
    if not signed:
        cos = np.abs(cos)
    keep = cos >= np.cos(np.deg2rad(max_angle)) - 1e-12
    return finish("normal_direction", c, keep, started, axis=axis.tolist(),
                  max_angle=float(max_angle), signed=bool(signed))


def crop_box(c: PointCloud, box: ExclusionBox):
    """Keep only the points inside `box`."""
    started = time.perf_counter()
    keep = box.contains(c.points) if len(c) else np.zeros(0, dtype=bool)
    return finish("crop_box", c, keep, started, box=box.to_dict())


def remove_near_planes(c: PointCloud, planes, dist, exclude: Optional[ExclusionBox] = None):
    """Drop points within `dist` of any plane, except those inside `exclude`."""
    started = time.perf_counter()
    if not dist > 0:
        raise InvalidParameter("dist must be > 0")
    near = np.zeros(len(c), dtype=bool)
    for plane in planes:
        near |= np.abs(plane.signed_distance(c.points)) <= dist
    if exclude is not None and len(c):
        near &= ~exclude.contains(c.points)
    return finish("remove_near_planes", c, ~near, started, dist=float(dist),
                  planes=[p.to_dict() for p in planes],
                  exclude=None if exclude is None else exclude.to_dict())


def background_subtract(c: PointCloud, reference: PointCloud, radius):
    """Keep points with no reference point within `radius` (inclusive)."""
    started = time.perf_counter()
    if not radius > 0:
        raise InvalidParameter("radius must be > 0")
    if reference.frame_id != c.frame_id:
        raise InvalidParameter(f"reference frame '{reference.frame_id}' differs from '{c.frame_id}'")
    near = NeighborIndex(reference).has_neighbor_within(c.points, radius)
    return finish("background_subtract", c, ~near, started, radius=float(radius),
                  reference_points=len(reference))


def statistical_outlier_removal(c: PointCloud, k=config.Outliers.K_NEIGHBORS,
                                stddev_mult=config.Outliers.STDDEV_MULT):
    """Remove points whose mean distance to their k nearest neighbours (self excluded)
    exceeds the global mean of that statistic plus stddev_mult standard deviations."""
    started = time.perf_counter()
    n = len(c)
    if k < 1:
        raise InvalidParameter("k must be >= 1")
    if n <= k:
        raise TooFewPoints(f"outlier removal with k={k} needs more than {k} points, got {n}")

    idx, dist = NeighborIndex(c).knn_batch(c.points, k + 1)
    drop = idx == np.arange(n)[:, None]
    # coincident duplicates can push a point out of its own list
    no_self = ~drop.any(axis=1)
    drop[no_self, -1] = True
    mean_dist = dist[~drop].reshape(n, k).mean(axis=1)

    limit = mean_dist.mean() + stddev_mult * mean_dist.std()
    limit += 1e-12 * max(1.0, abs(limit))
    keep = mean_dist <= limit
    return finish("statistical_outlier", c, keep, started, k=int(k), stddev_mult=float(stddev_mult))
