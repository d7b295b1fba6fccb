"""Voxel-grid downsampling."""

import numpy as np

from errors import InvalidParameter
from geom.cloud import PointCloud


def voxel_keys(points, cell):
    """Integer voxel coordinates floor(p / cell) of each point."""
    return np.floor(np.asarray(points, dtype=float) / cell).astype(np.int64)


def _group_mean(inverse, counts, values):
    columns = values.reshape(len(values), -1)
    sums = np.stack([np.bincount(inverse, weights=columns[:, j], minlength=len(counts))
                     for j in range(columns.shape[1])], axis=1)
    return (sums / counts[:, None]).reshape((len(counts),) + values.shape[1:])


def voxel_downsample(c: PointCloud, cell) -> PointCloud:
    """One point per occupied voxel at the centroid of its members.

    Channels are averaged per voxel; averaged normals are re-normalised (a voxel whose
    normals cancel keeps the normal of its first member). Output order follows the
    lexicographic order of voxel keys.
    """
    if not cell > 0:
        raise InvalidParameter("cell must be > 0")
    if c.is_empty():
        return c

    _, inverse, counts = np.unique(voxel_keys(c.points, cell), axis=0,
                                   return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    counts = counts.astype(float)

    points = _group_mean(inverse, counts, c.points)

    normals = None
    if c.has_normals:
        normals = _group_mean(inverse, counts, c.normals)
        length = np.linalg.norm(normals, axis=1)
        cancelled = length < 1e-9
        if np.any(cancelled):
            first = np.full(len(counts), len(inverse))
            np.minimum.at(first, inverse, np.arange(len(inverse)))
            normals[cancelled] = c.normals[first[cancelled]]
            length[cancelled] = 1.0
        normals = normals / length[:, None]

    intensities = None
    if c.has_intensities:
        intensities = _group_mean(inverse, counts, c.intensities)

    return PointCloud(points, normals, intensities, c.frame_id)
