"""Point pair features: model hash table, per-reference voting, cache files.

The feature of an ordered oriented pair (p1, n1), (p2, n2) with d = p2 - p1 is
(|d|, angle(n1, d), angle(n2, d), angle(n1, n2)). Each quantised feature packs into one
int64 key. The hash table is the model's keys sorted (stable) with parallel arrays of
(first point index, alpha); a key's entries are one contiguous slice.

alpha is the angle of the second point about +x after moving the first point to the
origin and rotating its normal onto +x: alpha = atan2(-z', y').
"""

import time
from dataclasses import dataclass

import numpy as np

import config
from error_logger import log_debug, log_error, log_info
from errors import InvalidParameter, MissingChannel, ModelCacheVersionError
from geom.cloud import PointCloud
from geom.transforms import RigidTransform, polar_orthonormalize

TWO_PI = 2.0 * np.pi


def _dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def pair_features(p1, n1, p2, n2):
    """(distance, angle(n1,d), angle(n2,d), angle(n1,n2)) in mm and radians, elementwise."""
    d = np.asarray(p2, dtype=float) - np.asarray(p1, dtype=float)
    dist = np.sqrt(_dot(d, d))
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = d / dist[..., None]
    f2 = np.arccos(np.clip(_dot(n1, unit), -1.0, 1.0))
    f3 = np.arccos(np.clip(_dot(n2, unit), -1.0, 1.0))
    f4 = np.arccos(np.clip(_dot(n1, n2), -1.0, 1.0))
    return dist, f2, f3, f4


def angle_bins(angle_step_rad):
    """Number of quantisation cells covering [0, pi]."""
    return int(np.floor(np.pi / angle_step_rad)) + 1


def quantize(dist, f2, f3, f4, dist_step, angle_step_rad):
    """Pack quantised features into int64 keys."""
    n = angle_bins(angle_step_rad)
    d_idx = np.floor(dist / dist_step).astype(np.int64)
    a2 = np.floor(f2 / angle_step_rad).astype(np.int64)
    a3 = np.floor(f3 / angle_step_rad).astype(np.int64)
    a4 = np.floor(f4 / angle_step_rad).astype(np.int64)
    return ((d_idx * n + a2) * n + a3) * n + a4


def aligning_rotations(normals):
    """(N, 3, 3) rotations taking each unit normal onto +x."""
    n = np.asarray(normals, dtype=float).reshape(-1, 3)
    c = n[:, 0]
    # axis = n x (1, 0, 0) = (0, n_z, -n_y)
    k = np.zeros((len(n), 3, 3))
    k[:, 0, 1], k[:, 0, 2] = n[:, 1], n[:, 2]
    k[:, 1, 0], k[:, 2, 0] = -n[:, 1], -n[:, 2]
    opposite = c < -1.0 + 1e-12
    scale = np.where(opposite, 0.0, 1.0 / np.where(opposite, 1.0, 1.0 + c))
    r = np.eye(3)[None, :, :] + k + (k @ k) * scale[:, None, None]
    r[opposite] = np.diag([-1.0, -1.0, 1.0])
    return r


def alpha_angles(rotation, origin, points):
    """alpha of `points` relative to a reference point at `origin` aligned by `rotation`."""
    v = np.asarray(points, dtype=float) - np.asarray(origin, dtype=float)
    y = rotation[1, 0] * v[..., 0] + rotation[1, 1] * v[..., 1] + rotation[1, 2] * v[..., 2]
    z = rotation[2, 0] * v[..., 0] + rotation[2, 1] * v[..., 1] + rotation[2, 2] * v[..., 2]
    return np.arctan2(-z, y)


def vote_bins(alpha_model, alpha_scene, angle_step_rad, n_bins):
    """Rotation-angle bin of alpha_model - alpha_scene and its deviation from the bin centre."""
    alpha = np.asarray(alpha_model) - np.asarray(alpha_scene)
    wrapped = np.mod(alpha + np.pi, TWO_PI)
    bins = np.floor(wrapped / angle_step_rad + 0.5).astype(np.int64) % n_bins
    centre = bins * angle_step_rad - np.pi
    deviation = np.mod(alpha - centre + np.pi, TWO_PI) - np.pi
    return bins, deviation


def rotation_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


@dataclass(frozen=True, eq=False)
class PpfModel:
    """Hash table of a model's point pairs plus the oriented model points it came from."""

    model_id: str
    points: np.ndarray
    normals: np.ndarray
    dist_step: float
    angle_step: float
    keys: np.ndarray
    first_index: np.ndarray
    alphas: np.ndarray
    diameter: float

    @property
    def angle_step_rad(self):
        return np.deg2rad(self.angle_step)

    @property
    def n_vote_bins(self):
        return int(round(360.0 / self.angle_step))

    @property
    def pair_count(self):
        return len(self.keys)

    @property
    def distinct_buckets(self):
        return int(len(np.unique(self.keys)))

    @property
    def cloud(self):
        return PointCloud(self.points, self.normals, None, "model")

    @property
    def flip_pivot(self):
        return self.points.mean(axis=0)

    def lookup(self, keys):
        """(start, end) slice bounds of each key's entries."""
        keys = np.asarray(keys, dtype=np.int64)
        return (np.searchsorted(self.keys, keys, side="left"),
                np.searchsorted(self.keys, keys, side="right"))

    def entries(self, key):
        """(first point indices, alphas) stored under one key."""
        start, end = self.lookup(np.array([key]))
        return self.first_index[start[0]:end[0]], self.alphas[start[0]:end[0]]

    def pose_from_vote(self, model_index, scene_point, scene_rotation, alpha) -> RigidTransform:
        """model->scene pose that aligns model reference `model_index` with the scene reference."""
        r_m = aligning_rotations(self.normals[model_index:model_index + 1])[0]
        rotation = polar_orthonormalize(scene_rotation.T @ rotation_x(alpha) @ r_m)
        return RigidTransform(rotation, np.asarray(scene_point) - rotation @ self.points[model_index])


def build_ppf_model(cloud: PointCloud, dist_step, angle_step, model_id="model") -> PpfModel:
    """Hash every ordered pair (i, j), i != j, of the oriented cloud.

    Coincident pairs have no direction and are skipped.
    """
    started = time.perf_counter()
    if not cloud.has_normals:
        raise MissingChannel("normals")
    if not dist_step > 0 or not angle_step > 0:
        raise InvalidParameter("dist_step and angle_step must be > 0")
    step_rad = np.deg2rad(angle_step)
    points, normals = cloud.points, cloud.normals
    n = len(points)
    rotations = aligning_rotations(normals)

    keys, first, alphas = [], [], []
    diameter = 0.0
    all_idx = np.arange(n)
    for i in range(n):
        j = all_idx[all_idx != i]
        dist, f2, f3, f4 = pair_features(points[i], normals[i], points[j], normals[j])
        ok = dist > 0
        if not np.any(ok):
            continue
        j, dist, f2, f3, f4 = j[ok], dist[ok], f2[ok], f3[ok], f4[ok]
        diameter = max(diameter, float(dist.max()))
        keys.append(quantize(dist, f2, f3, f4, dist_step, step_rad))
        first.append(np.full(len(j), i, dtype=np.int64))
        alphas.append(alpha_angles(rotations[i], points[i], points[j]))

    if keys:
        keys, first, alphas = np.concatenate(keys), np.concatenate(first), np.concatenate(alphas)
    else:
        keys, first, alphas = np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    order = np.argsort(keys, kind="stable")
    model = PpfModel(model_id, points.copy(), normals.copy(), float(dist_step), float(angle_step),
                     keys[order], first[order], alphas[order], diameter)
    log_info(f"PPF model '{model_id}': {n} points, {model.pair_count} pairs, "
             f"{model.distinct_buckets} buckets in {time.perf_counter() - started:.2f}s")
    return model


def build_ppf_model_for(workpiece, step=None, dist_step_rel=config.Ppf.DIST_STEP_REL,
                        angle_step=config.Ppf.ANGLE_STEP) -> PpfModel:
    """PPF model of a WorkpieceModel sampled at `step` (default: its own sample step)."""
    cloud = workpiece.sampled_cloud if step is None else workpiece.with_step(step).sampled_cloud
    return build_ppf_model(cloud, dist_step_rel * workpiece.diameter, angle_step, workpiece.id)


def reference_votes(model: PpfModel, scene_points, scene_normals, ref, partners=None):
    """Vote accumulator of one scene reference point.

    Returns (votes, deviation_sums), both (model points, rotation bins). `partners` are the
    scene indices paired with `ref` (default: all); `ref` itself, coincident points and
    partners farther than the model diameter are skipped.
    """
    n_model, n_bins = len(model.points), model.n_vote_bins
    votes = np.zeros((n_model, n_bins), dtype=np.int64)
    deviation = np.zeros((n_model, n_bins))
    partners = np.arange(len(scene_points)) if partners is None else np.asarray(partners, dtype=np.int64)
    partners = partners[partners != ref]
    if len(partners) == 0 or model.pair_count == 0:
        return votes, deviation

    p_r, n_r = scene_points[ref], scene_normals[ref]
    dist, f2, f3, f4 = pair_features(p_r, n_r, scene_points[partners], scene_normals[partners])
    ok = (dist > 0) & (dist <= model.diameter)
    if not np.any(ok):
        return votes, deviation
    partners = partners[ok]
    keys = quantize(dist[ok], f2[ok], f3[ok], f4[ok], model.dist_step, model.angle_step_rad)
    rotation = aligning_rotations(n_r[None, :])[0]
    alpha_s = alpha_angles(rotation, p_r, scene_points[partners])

    start, end = model.lookup(keys)
    counts = end - start
    total = int(counts.sum())
    if total == 0:
        return votes, deviation
    offsets = np.repeat(start - np.cumsum(counts) + counts, counts)
    entry = offsets + np.arange(total)
    bins, dev = vote_bins(model.alphas[entry], np.repeat(alpha_s, counts), model.angle_step_rad, n_bins)
    flat = model.first_index[entry] * n_bins + bins
    size = n_model * n_bins
    votes += np.bincount(flat, minlength=size).reshape(n_model, n_bins)
    deviation += np.bincount(flat, weights=dev, minlength=size).reshape(n_model, n_bins)
    return votes, deviation


def save_ppf_model(model: PpfModel, path):
    """Cache a model as .npz with a version tag."""
    try:
        with open(path, "wb") as f:
            np.savez_compressed(
                f, version=np.int64(config.Ppf.CACHE_VERSION), model_id=np.array(model.model_id),
                points=model.points, normals=model.normals, dist_step=model.dist_step,
                angle_step=model.angle_step, keys=model.keys, first_index=model.first_index,
                alphas=model.alphas, diameter=model.diameter)
    except OSError as e:
        log_error(f"Failed to write PPF cache {path}", e)
        raise
    log_debug(f"PPF model '{model.model_id}' cached to {path}")


def load_ppf_model(path) -> PpfModel:
    try:
        with np.load(path, allow_pickle=False) as data:
            version = int(data["version"])
            if version != config.Ppf.CACHE_VERSION:
                raise ModelCacheVersionError(
                    f"{path}: cache version {version}, expected {config.Ppf.CACHE_VERSION}")
            return PpfModel(str(data["model_id"]), data["points"], data["normals"],
                            float(data["dist_step"]), float(data["angle_step"]), data["keys"],
                            data["first_index"], data["alphas"], float(data["diameter"]))
    except OSError as e:
        log_error(f"Failed to read PPF cache {path}", e)
        raise
    except KeyError as e:
        raise ModelCacheVersionError(f"{path}: missing field {e}")
