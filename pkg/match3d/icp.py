"""Point-to-point ICP refinement of a model->scene pose."""

from dataclasses import dataclass, field
from typing import List

import numpy as np

import config
from error_logger import log_debug
from errors import NoCorrespondences
from geom.cloud import PointCloud
from geom.neighbors import NeighborIndex
from geom.transforms import RigidTransform, kabsch


@dataclass(frozen=True, eq=False)
class IcpResult:
    pose: RigidTransform
    rms: float
    iterations: int
    history: List[float] = field(default_factory=list)


def _correspondences(scene_points, model_index, pose, max_dist):
    """Scene points moved into the model frame and paired with their nearest model point."""
    local = pose.inverse().apply_points(scene_points)
    dist, idx = model_index.nearest(local)
    keep = dist <= max_dist
    return keep, idx, dist


def icp_refine_detailed(scene: PointCloud, model_cloud: PointCloud, initial: RigidTransform,
                        max_iter=config.Icp.MAX_ITER, tol=config.Icp.TOL,
                        max_dist=config.Icp.MAX_CORRESPONDENCE) -> IcpResult:
    """ICP with the RMS history of every accepted step.

    Each scene point within `max_dist` of the posed model is paired with its nearest model
    point and the pose is re-solved with Kabsch. A step that would raise the RMS is
    rejected, so the history never increases. Stops when the RMS improves by less than
    `tol` or after `max_iter` steps.
    """
    model_index = NeighborIndex(model_cloud)
    pose = initial
    keep, idx, dist = _correspondences(scene.points, model_index, pose, max_dist)
    if keep.sum() < config.Icp.MIN_CORRESPONDENCES:
        raise NoCorrespondences(f"{int(keep.sum())} scene points within {max_dist} mm of the model")
    rms = float(np.sqrt(np.mean(dist[keep] ** 2)))
    history = [rms]

    iterations = 0
    for iterations in range(1, max_iter + 1):
        candidate = kabsch(model_cloud.points[idx[keep]], scene.points[keep])
        next_keep, next_idx, next_dist = _correspondences(scene.points, model_index, candidate, max_dist)
        if next_keep.sum() < config.Icp.MIN_CORRESPONDENCES:
            break
        next_rms = float(np.sqrt(np.mean(next_dist[next_keep] ** 2)))
        if next_rms > rms:
            break
        improvement = rms - next_rms
        pose, rms, keep, idx = candidate, next_rms, next_keep, next_idx
        history.append(rms)
        if improvement < tol:
            break

    log_debug(f"ICP: {iterations} iterations, rms {history[0]:.4f} -> {rms:.4f} mm")
    return IcpResult(pose, rms, iterations, history)


def icp_refine(scene: PointCloud, model_cloud: PointCloud, initial: RigidTransform,
               max_iter=config.Icp.MAX_ITER, tol=config.Icp.TOL,
               max_dist=config.Icp.MAX_CORRESPONDENCE):
    """Refined pose and final RMS (mm)."""
    result = icp_refine_detailed(scene, model_cloud, initial, max_iter, tol, max_dist)
    return result.pose, result.rms
