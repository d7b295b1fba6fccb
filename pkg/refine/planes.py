"""Greedy multi-plane RANSAC and plane subtraction."""

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

import config
from error_logger import log_debug, log_filter_report
from errors import InvalidParameter
from geom.cloud import PointCloud
from refine.filters import ExclusionBox, remove_near_planes
from refine.report import FilterReport


@dataclass(frozen=True, eq=False)
class Plane:
    """{p : normal . p = offset}; `inliers` holds input indices when the plane came from a fit."""

    normal: np.ndarray
    offset: float
    inlier_count: int = 0
    inliers: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        normal = np.array(self.normal, dtype=float).reshape(3)
        if abs(np.linalg.norm(normal) - 1.0) > config.Tolerances.PLANE_NORMAL:
            raise InvalidParameter("plane normal must be unit length")
        normal.setflags(write=False)
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))

    @staticmethod
    def from_normal(normal, offset, inlier_count=0, inliers=None):
        """Build from any non-zero normal, rescaling the offset to match."""
        normal = np.asarray(normal, dtype=float)
        length = np.linalg.norm(normal)
        if length == 0.0:
            raise InvalidParameter("plane normal has zero length")
        return Plane(normal / length, offset / length, inlier_count, inliers)

    def signed_distance(self, points):
        return np.asarray(points, dtype=float).reshape(-1, 3) @ self.normal - self.offset

    def to_dict(self):
        return {"normal": self.normal.tolist(), "offset": self.offset,
                "inlier_count": int(self.inlier_count)}

    @staticmethod
    def from_dict(data):
        return Plane.from_normal(data["normal"], data["offset"], int(data.get("inlier_count", 0)))


def required_iterations(inlier_ratio, probability=config.Ransac.SUCCESS_PROBABILITY,
                        cap=config.Ransac.MAX_ITERATIONS):
    """Hypotheses needed to draw one all-inlier triple with the given probability."""
    if inlier_ratio <= 0.0:
        return cap
    hit = inlier_ratio ** 3
    if hit >= 1.0:
        return 1
    return min(cap, int(math.ceil(math.log(1.0 - probability) / math.log(1.0 - hit))))


def _orient_up(normal, offset):
    # +z first, then +y, then +x, so the sign is reproducible
    for axis in (2, 1, 0):
        if abs(normal[axis]) > 1e-12:
            if normal[axis] < 0:
                return -normal, -offset
            break
    return normal, offset


def _least_squares_plane(points):
    centroid = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - centroid, full_matrices=False)
    normal = vt[-1] / np.linalg.norm(vt[-1])
    return normal, float(normal @ centroid)


def _best_hypothesis(points, dist_tol, rng, max_iterations):
    n = len(points)
    best_count, best = 0, None
    needed, done = max_iterations, 0
    while done < needed:
        batch = min(config.Ransac.BATCH, needed - done)
        triples = rng.integers(0, n, size=(batch, 3))
        p0, p1, p2 = points[triples[:, 0]], points[triples[:, 1]], points[triples[:, 2]]
        normals = np.cross(p1 - p0, p2 - p0)
        length = np.linalg.norm(normals, axis=1)
        ok = length > 1e-12
        normals[ok] /= length[ok, None]
        offsets = np.einsum("ij,ij->i", normals, p0)
        counts = (np.abs(points @ normals.T - offsets) <= dist_tol).sum(axis=0)
        counts[~ok] = 0
        j = int(np.argmax(counts))
        if counts[j] > best_count:
            best_count, best = int(counts[j]), (normals[j], offsets[j])
            needed = max(done + batch, required_iterations(best_count / n, cap=max_iterations))
        done += batch
    return best


def fit_planes_ransac(c: PointCloud, dist_tol, min_inliers, max_planes,
                      seed=config.Ransac.SEED, max_iterations=config.Ransac.MAX_ITERATIONS) -> List[Plane]:
    """Greedy iterative RANSAC: fit, remove inliers, repeat.

    Stops after `max_planes` planes or once fewer than `min_inliers` points remain or no
    hypothesis reaches `min_inliers`. Each plane is refined by least squares over its
    inliers and oriented with a non-negative z component.
    """
    if not dist_tol > 0:
        raise InvalidParameter("dist_tol must be > 0")
    if min_inliers < 3:
        raise InvalidParameter("min_inliers must be >= 3")
    rng = np.random.default_rng(seed)
    remaining = np.arange(len(c))
    planes = []

    while len(planes) < max_planes and len(remaining) >= min_inliers:
        points = c.points[remaining]
        best = _best_hypothesis(points, dist_tol, rng, max_iterations)
        if best is None:
            break
        normal, offset = best
        mask = np.abs(points @ normal - offset) <= dist_tol
        if mask.sum() < min_inliers:
            break
        for _ in range(config.Ransac.REFINE_ROUNDS):
            refined_normal, refined_offset = _least_squares_plane(points[mask])
            refined_mask = np.abs(points @ refined_normal - refined_offset) <= dist_tol
            if refined_mask.sum() < min_inliers:
                break
            normal, offset, mask = refined_normal, refined_offset, refined_mask

        normal, offset = _orient_up(normal, offset)
        plane = Plane.from_normal(normal, offset, int(mask.sum()), remaining[mask])
        planes.append(plane)
        log_debug(f"RANSAC plane {len(planes)}: n={np.round(plane.normal, 4).tolist()} "
                  f"d={plane.offset:.3f} inliers={plane.inlier_count}")
        remaining = remaining[~mask]

    return planes


def segment_and_remove_planes(c: PointCloud, dist_tol, min_inliers, max_planes, remove_dist,
                              exclude: Optional[ExclusionBox] = None, seed=config.Ransac.SEED):
    """Fit planes then strip every point near them; one report covers both steps."""
    started = time.perf_counter()
    planes = fit_planes_ransac(c, dist_tol, min_inliers, max_planes, seed=seed)
    out, inner = remove_near_planes(c, planes, remove_dist, exclude)
    report = FilterReport("plane_subtraction", len(c), len(out), time.perf_counter() - started,
                          {"dist_tol": float(dist_tol), "min_inliers": int(min_inliers),
                           "max_planes": int(max_planes), "seed": int(seed),
                           **inner.parameters})
    log_filter_report(report)
    return out, planes, report
