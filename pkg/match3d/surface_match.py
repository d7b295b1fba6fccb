"""Surface-based matching: PPF voting, pose clustering, overlap scoring, flip hypotheses."""

import time
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

import config
from error_logger import log_debug, log_match
from errors import EmptyScene, InvalidParameter, MissingChannel
from geom.cloud import PointCloud
from geom.neighbors import NeighborIndex
from geom.sampling import voxel_downsample
from geom.transforms import RigidTransform, pose_error
from match3d.ppf import PpfModel, aligning_rotations, reference_votes
from match3d.results import MatchResult, sort_results


@dataclass
class MatchParams:
    """Tunables of surface matching; `score_tol` None means 2 x the model's dist_step.

    `viewpoint` (in scene coordinates) restricts scoring to model points facing it, so
    a part seen from one side can still reach a high score. `scene_step` voxel-downsamples
    the scene before voting.
    """

    ref_sampling: int = config.Ppf.REF_SAMPLING
    trans_tol_rel: float = config.Clustering.TRANS_TOL_REL
    rot_tol: float = config.Clustering.ROT_TOL
    candidates: int = config.Clustering.CANDIDATES
    max_results: int = config.Clustering.MAX_RESULTS
    score_tol: Optional[float] = None
    min_score: float = 0.0
    edge_weight: float = config.Scoring.EDGE_WEIGHT
    viewpoint: Optional[Sequence[float]] = None
    scene_step: Optional[float] = None
    flip_gap: float = config.Clustering.FLIP_SCORE_GAP

    def __post_init__(self):
        if self.ref_sampling < 1:
            raise InvalidParameter("ref_sampling must be >= 1")
        if not 0.0 <= self.edge_weight <= 1.0:
            raise InvalidParameter("edge_weight must lie in [0, 1]")
        if self.score_tol is not None and not self.score_tol > 0:
            raise InvalidParameter("score_tol must be > 0")

    def tolerance_for(self, model: PpfModel):
        if self.score_tol is not None:
            return self.score_tol
        return config.Scoring.SCORE_TOL_REL * model.dist_step

    def to_dict(self):
        data = asdict(self)
        if self.viewpoint is not None:
            data["viewpoint"] = [float(v) for v in self.viewpoint]
        return data

    @staticmethod
    def from_dict(data):
        known = MatchParams.__dataclass_fields__
        unknown = set(data) - set(known)
        if unknown:
            raise InvalidParameter(f"unknown match parameters: {sorted(unknown)}")
        return MatchParams(**data)


@dataclass
class PoseCluster:
    pose: RigidTransform
    votes: int
    best_votes: int
    members: int = 1


def cluster_poses(candidates, trans_tol, rot_tol) -> List[PoseCluster]:
    """Greedy agglomeration of (pose, votes) in descending vote order.

    A candidate joins the first cluster whose representative (its highest-vote member) is
    within both tolerances. `votes` is the sum over all members and sets the ranking, so a
    cluster of several mid-vote poses outranks a lone pose with the single highest vote;
    `best_votes` keeps the representative's own count.
    """
    order = sorted(range(len(candidates)), key=lambda k: (-candidates[k][1], k))
    clusters: List[PoseCluster] = []
    for k in order:
        pose, votes = candidates[k]
        for cluster in clusters:
            dt, dr = pose_error(cluster.pose, pose)
            if dt <= trans_tol and dr <= rot_tol:
                cluster.votes += votes
                cluster.members += 1
                break
        else:
            clusters.append(PoseCluster(pose, votes, votes))
    clusters.sort(key=lambda c: -c.votes)
    return clusters


def _visible(points, normals, viewpoint):
    if viewpoint is None or normals is None:
        return np.ones(len(points), dtype=bool)
    towards = np.asarray(viewpoint, dtype=float) - points
    return np.einsum("ij,ij->i", normals, towards) > 0


def overlap_score(scene_index: NeighborIndex, model_points, model_normals, pose: RigidTransform,
                  tol, viewpoint=None):
    """Fraction of (visible) posed model points with a scene point within `tol`."""
    if len(scene_index) == 0 or len(model_points) == 0:
        return 0.0
    points = pose.apply_points(model_points)
    normals = None if model_normals is None else pose.apply_vectors(model_normals)
    visible = _visible(points, normals, viewpoint)
    if not np.any(visible):
        return 0.0
    return float(scene_index.has_neighbor_within(points[visible], tol).mean())


def score_pose(scene: PointCloud, model_cloud: PointCloud, pose: RigidTransform, tol, viewpoint=None):
    """Public overlap scorer: fraction of model points matched by the scene within `tol`."""
    return overlap_score(NeighborIndex(scene), model_cloud.points, model_cloud.normals, pose, tol,
                         viewpoint)


def flip_transform(model: PpfModel) -> RigidTransform:
    """Half turn about the model x-axis through the model's centre (top and bottom swap)."""
    pivot = model.flip_pivot
    rotation = np.diag([1.0, -1.0, -1.0])
    return RigidTransform(rotation, pivot - rotation @ pivot)


def vote_poses(scene: PointCloud, model: PpfModel, ref_sampling):
    """One (pose, votes) candidate per sampled scene reference point with any votes."""
    index = NeighborIndex(scene)
    refs = np.arange(0, len(scene), ref_sampling)
    step = model.angle_step_rad
    candidates = []
    for ref in refs:
        partners = index.radius(scene.points[ref], model.diameter)
        votes, deviation = reference_votes(model, scene.points, scene.normals, ref, partners)
        peak = int(np.argmax(votes))
        count = int(votes.flat[peak])
        if count == 0:
            continue
        model_index, rot_bin = divmod(peak, model.n_vote_bins)
        alpha = rot_bin * step - np.pi + deviation.flat[peak] / count
        scene_rotation = aligning_rotations(scene.normals[ref:ref + 1])[0]
        pose = model.pose_from_vote(model_index, scene.points[ref], scene_rotation, alpha)
        candidates.append((pose, count))
    return candidates


class _Scorer:
    """Surface score, optionally blended with an edge score."""

    def __init__(self, scene, model, params, edges=None, model_edges=None):
        self.scene_index = NeighborIndex(scene)
        self.model = model
        self.tol = params.tolerance_for(model)
        self.viewpoint = params.viewpoint
        self.weight = params.edge_weight
        self.use_edges = (edges is not None and model_edges is not None
                          and len(edges) > 0 and len(model_edges) > 0)
        if self.use_edges:
            self.edge_index = NeighborIndex(edges)
            self.model_edges = model_edges

    def __call__(self, pose):
        surface = overlap_score(self.scene_index, self.model.points, self.model.normals, pose,
                                self.tol, self.viewpoint)
        if not self.use_edges:
            return surface, surface, None
        edge = overlap_score(self.edge_index, self.model_edges.points, self.model_edges.normals, pose,
                             self.tol, self.viewpoint)
        blended = (1.0 - self.weight) * surface + self.weight * edge
        return min(1.0, max(0.0, blended)), surface, edge


def _is_duplicate(pose, results, trans_tol, rot_tol):
    for other in results:
        dt, dr = pose_error(pose, other.pose)
        if dt <= trans_tol and dr <= rot_tol:
            return True
    return False


def _match(scene, model: PpfModel, params: MatchParams, edges=None, model_edges=None):
    started = time.perf_counter()
    if scene.is_empty():
        raise EmptyScene(config.Messages.EMPTY_SCENE)
    if not scene.has_normals:
        raise MissingChannel("normals")
    if params.scene_step:
        scene = voxel_downsample(scene, params.scene_step)

    candidates = vote_poses(scene, model, params.ref_sampling)
    if not candidates:
        return []
    trans_tol = params.trans_tol_rel * model.diameter
    clusters = cluster_poses(candidates, trans_tol, params.rot_tol)[:params.candidates]

    scorer = _Scorer(scene, model, params, edges, model_edges)
    results = []
    for cluster in clusters:
        score, surface, edge = scorer(cluster.pose)
        results.append(MatchResult(model.model_id, cluster.pose, score, 0.0, surface, edge,
                                   cluster.votes))
    results = sort_results(results)

    # sheet parts look alike from either face: keep the flipped twin when it scores close
    best = results[0]
    flipped_pose = best.pose.compose(flip_transform(model))
    score, surface, edge = scorer(flipped_pose)
    if abs(best.score - score) < params.flip_gap and not _is_duplicate(
            flipped_pose, results[:1], trans_tol, params.rot_tol):
        results.append(MatchResult(model.model_id, flipped_pose, score, 0.0, surface, edge,
                                   best.votes, flipped=True))
        results = sort_results(results)

    kept = []
    for result in results:
        if result.score < params.min_score:
            continue
        if _is_duplicate(result.pose, kept, trans_tol, params.rot_tol):
            continue
        kept.append(result)
        if len(kept) == params.max_results:
            break

    duration = time.perf_counter() - started
    kept = [r.with_duration(duration) for r in kept]
    for result in kept[:1]:
        log_match(result)
    log_debug(f"surface match '{model.model_id}': {len(candidates)} votes, {len(clusters)} clusters, "
              f"{len(kept)} results in {duration:.3f}s")
    return kept


def surface_based_match(scene: PointCloud, model: PpfModel, params: Optional[MatchParams] = None):
    """Match a PPF model against a scene with normals; results sorted by descending score."""
    return _match(scene, model, params or MatchParams())


def edge_supported_match(scene: PointCloud, edges: PointCloud, model: PpfModel,
                         model_edges: PointCloud, params: Optional[MatchParams] = None):
    """Surface matching whose score blends in the fraction of model edge points near scene edges.

    With an empty edge cloud the score is the surface score unchanged.
    """
    return _match(scene, model, params or MatchParams(), edges, model_edges)


def match_models(scene: PointCloud, models: Dict[str, PpfModel], params: Optional[MatchParams] = None,
                 edges: Optional[PointCloud] = None, model_edges: Optional[Dict[str, PointCloud]] = None):
    """Match every model; the merged list is sorted by score so the top entry names the part."""
    params = params or MatchParams()
    results = []
    for model_id in sorted(models):
        if edges is not None and model_edges is not None and model_id in model_edges:
            results += edge_supported_match(scene, edges, models[model_id], model_edges[model_id], params)
        else:
            results += surface_based_match(scene, models[model_id], params)
    return sort_results(results)
