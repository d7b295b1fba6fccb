"""Normal estimation from local covariance (PCA over k-nearest neighbourhoods)."""

import numpy as np

import config
from errors import InvalidParameter, TooFewPoints
from error_logger import log_debug, log_warning
from geom.cloud import PointCloud
from geom.neighbors import NeighborIndex


def estimate_normals(c: PointCloud, k=config.Normals.K_NEIGHBORS,
                     viewpoint=config.Normals.VIEWPOINT) -> PointCloud:
    """Return `c` with a unit normal per point.

    The neighbourhood of a point is the point itself plus its k nearest neighbours; the
    normal is the eigenvector of the smallest covariance eigenvalue, flipped so that
    normal . (viewpoint - p) >= 0. Raises TooFewPoints when c has fewer than k+1 points or
    when every neighbourhood is degenerate (collinear or coincident points).
    """
    if k < 2:
        raise InvalidParameter("k must be >= 2")
    n = len(c)
    if n < k + 1:
        raise TooFewPoints(f"normal estimation with k={k} needs at least {k + 1} points, got {n}")

    idx, _ = NeighborIndex(c).knn_batch(c.points, k + 1)
    hood = c.points[idx]
    centred = hood - hood.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centred, centred) / (k + 1)
    eigval, eigvec = np.linalg.eigh(cov)
    normals = eigvec[:, :, 0]

    # rank < 2 leaves the plane through the neighbourhood undefined
    scale = np.maximum(eigval[:, 2], np.finfo(float).tiny)
    degenerate = eigval[:, 1] <= config.Tolerances.DEGENERATE_EIGEN_RATIO * scale
    if np.all(degenerate):
        raise TooFewPoints("all neighbourhoods are degenerate (collinear or coincident points)")
    if np.any(degenerate):
        log_warning(f"estimate_normals: {int(degenerate.sum())} of {n} neighbourhoods degenerate")

    towards = np.asarray(viewpoint, dtype=float) - c.points
    flip = np.einsum("ij,ij->i", normals, towards) < 0
    normals[flip] *= -1.0
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)

    log_debug(f"estimate_normals: {n} points, k={k}")
    return c.with_normals(normals)
