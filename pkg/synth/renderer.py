"""Z-buffer ray caster for synthetic depth-camera scans.

One ray per pixel centre, nearest hit wins. Rays are cast in the scene frame with the
camera-frame direction (x, y, 1), so the ray parameter of a hit equals its camera depth.
"""

import time
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

import config
from error_logger import log_debug, log_info
from errors import EmptyScene, InvalidParameter
from geom.cloud import PointCloud
from geom.depth_image import DepthImage
from geom.transforms import RigidTransform
from match3d.registry import builtin_models
from match3d.workpiece import WorkpieceModel, points_in_polygon, sample_model
from synth.ground_truth import FIXTURE, GHOST, PART, GroundTruth, PartTruth
from synth.scene_spec import Box, Cylinder, SceneSpec

EPS = 1e-9
VISIBILITY_STEP = 2.0


def _local_rays(pose: RigidTransform, origin, dirs):
    inverse = pose.inverse()
    return inverse.apply_points(origin[None, :])[0], inverse.apply_vectors(dirs)


def _slabs(o, d, lo, hi):
    """Entry/exit parameters and entry axis of rays against the box [lo, hi]."""
    parallel = np.abs(d) < 1e-15
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    inside = (o >= lo) & (o <= hi)
    t_near = np.where(parallel, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
    t_far = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
    axis = np.argmax(t_near, axis=1)
    return t_near.max(axis=1), t_far.min(axis=1), axis


def intersect_box(box: Box, origin, dirs):
    """(t, normals) of the nearest hit; t is inf where the ray misses."""
    o, d = _local_rays(box.pose, origin, dirs)
    half = np.asarray(box.size) / 2.0
    near, far, axis = _slabs(o, d, -half, half)
    hit = (near <= far) & (near > EPS)
    t = np.where(hit, near, np.inf)
    normals = np.zeros_like(d)
    rows = np.arange(len(d))
    normals[rows, axis] = -np.sign(d[rows, axis])
    return t, box.pose.apply_vectors(normals)


def intersect_cylinder(cyl: Cylinder, origin, dirs):
    o, d = _local_rays(cyl.pose, origin, dirs)
    r, half = cyl.radius, cyl.length / 2.0
    a = d[:, 1] ** 2 + d[:, 2] ** 2
    b = 2.0 * (o[1] * d[:, 1] + o[2] * d[:, 2])
    c = o[1] ** 2 + o[2] ** 2 - r ** 2
    disc = b * b - 4.0 * a * c
    with np.errstate(divide="ignore", invalid="ignore"):
        t_side = (-b - np.sqrt(np.clip(disc, 0.0, None))) / (2.0 * a)
    x = o[0] + t_side * d[:, 0]
    side = (a > 1e-15) & (disc >= 0) & (t_side > EPS) & (np.abs(x) <= half)
    t = np.where(side, t_side, np.inf)
    normals = np.zeros_like(d)
    hit_side = o[None, :] + t_side[:, None] * d
    normals[side, 1:] = hit_side[side, 1:] / r

    for sign in (-1.0, 1.0):
        with np.errstate(divide="ignore", invalid="ignore"):
            t_cap = (sign * half - o[0]) / d[:, 0]
        p = o[None, :] + t_cap[:, None] * d
        cap = (np.abs(d[:, 0]) > 1e-15) & (t_cap > EPS) & (p[:, 1] ** 2 + p[:, 2] ** 2 <= r ** 2) & (t_cap < t)
        t = np.where(cap, t_cap, t)
        normals[cap] = [sign, 0.0, 0.0]
    return t, cyl.pose.apply_vectors(normals)


def intersect_part(model: WorkpieceModel, pose: RigidTransform, origin, dirs):
    """Nearest hit on the extruded outline (top, bottom and walls)."""
    o, d = _local_rays(pose, origin, dirs)
    outline = model.outline
    lo = np.array([outline[:, 0].min(), outline[:, 1].min(), 0.0])
    hi = np.array([outline[:, 0].max(), outline[:, 1].max(), model.thickness])
    near, far, _ = _slabs(o, d, lo, hi)
    idx = np.nonzero((near <= far) & (far > EPS))[0]

    t = np.full(len(d), np.inf)
    normals = np.zeros_like(d)
    if len(idx) == 0:
        return t, pose.apply_vectors(normals)
    dc = d[idx]
    best = np.full(len(idx), np.inf)
    best_n = np.zeros((len(idx), 3))

    for z_face, nz in ((model.thickness, 1.0), (0.0, -1.0)):
        with np.errstate(divide="ignore", invalid="ignore"):
            tf = (z_face - o[2]) / dc[:, 2]
        xy = o[None, :2] + tf[:, None] * dc[:, :2]
        ok = (np.abs(dc[:, 2]) > 1e-15) & (tf > EPS) & (tf < best)
        ok[ok] = points_in_polygon(xy[ok], outline)
        best = np.where(ok, tf, best)
        best_n[ok] = [0.0, 0.0, nz]

    for a, b in zip(outline, np.roll(outline, -1, axis=0)):
        e = b - a
        length = float(np.hypot(*e))
        den = -dc[:, 0] * e[1] + dc[:, 1] * e[0]
        rx, ry = a[0] - o[0], a[1] - o[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            tw = (-rx * e[1] + ry * e[0]) / den
            s = (dc[:, 0] * ry - dc[:, 1] * rx) / den
        z = o[2] + tw * dc[:, 2]
        ok = (np.abs(den) > 1e-15) & (tw > EPS) & (tw < best) & (s >= 0) & (s <= 1) & (z >= 0) & (z <= model.thickness)
        best = np.where(ok, tw, best)
        best_n[ok] = [e[1] / length, -e[0] / length, 0.0]

    t[idx] = best
    normals[idx] = best_n
    return t, pose.apply_vectors(normals)


@dataclass(frozen=True, eq=False)
class CastResult:
    """Noise-free z-buffer: depth (N,), scene normals (N, 3), primitive index (N,), -1 for misses."""

    depth: np.ndarray
    normals: np.ndarray
    source: np.ndarray
    rays: np.ndarray
    dirs: np.ndarray
    n_fixtures: int


def resolve_models(spec: SceneSpec, models: Optional[Dict[str, WorkpieceModel]] = None):
    models = builtin_models() if models is None else models
    missing = sorted({p.model_id for p in spec.parts} - set(models))
    if missing:
        raise InvalidParameter(f"unknown model ids in scene: {missing}")
    return models


def cast(spec: SceneSpec, models: Dict[str, WorkpieceModel]) -> CastResult:
    cam = spec.camera
    rays = cam.pixel_rays().reshape(-1, 3)
    origin = spec.cam_pose.translation
    dirs = spec.cam_pose.apply_vectors(rays)
    depth = np.full(len(rays), np.inf)
    normals = np.zeros((len(rays), 3))
    source = np.full(len(rays), -1, dtype=np.int64)

    hits = []
    for fixture in spec.fixtures:
        if isinstance(fixture, Box):
            hits.append(intersect_box(fixture, origin, dirs))
        elif isinstance(fixture, Cylinder):
            hits.append(intersect_cylinder(fixture, origin, dirs))
        else:
            raise InvalidParameter(f"unsupported fixture {type(fixture).__name__}")
    for part in spec.parts:
        hits.append(intersect_part(models[part.model_id], part.pose, origin, dirs))

    for k, (t, n) in enumerate(hits):
        closer = t < depth
        depth = np.where(closer, t, depth)
        normals[closer] = n[closer]
        source[closer] = k
    return CastResult(depth, normals, source, rays, dirs, len(spec.fixtures))


def part_visibility(spec: SceneSpec, model: WorkpieceModel, pose: RigidTransform, clean_depth,
                    own_pixels=None):
    """Fraction of the camera-facing surface of a part that is in view and unoccluded.

    A sample counts when its pixel shows the part itself (`own_pixels`) or nothing nearer
    than the depth tolerance, which never exceeds half the part thickness.
    """
    cam = spec.camera
    samples = sample_model(model, VISIBILITY_STEP)
    to_cam = spec.cam_H_scene.compose(pose)
    points = to_cam.apply_points(samples.points)
    normals = to_cam.apply_vectors(samples.normals)
    facing = np.einsum("ij,ij->i", normals, -points) > 0
    if not np.any(facing):
        return 0.0
    u, v, z = cam.project(points[facing])
    inside = (z > 0) & (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height) & cam.in_range(z)
    visible = np.zeros(len(z), dtype=bool)
    cols = np.floor(u[inside]).astype(np.int64)
    rows = np.floor(v[inside]).astype(np.int64)
    buffer = clean_depth.reshape(cam.height, cam.width)[rows, cols]
    tol = np.minimum(np.maximum(1.0, 2.0 * z[inside] / cam.focal_length_px), 0.5 * model.thickness)
    visible[inside] = z[inside] <= buffer + tol
    if own_pixels is not None:
        visible[inside] |= own_pixels.reshape(cam.height, cam.width)[rows, cols]
    return float(visible.sum() / len(z))


def render(spec: SceneSpec, models: Optional[Dict[str, WorkpieceModel]] = None):
    """(DepthImage, PointCloud in the camera frame, GroundTruth) of a scene.

    Noise is drawn from a generator seeded with spec.seed in a fixed order, so the same
    spec renders bit-identically. Points outside the camera's z_range are dropped.
    """
    started = time.perf_counter()
    models = resolve_models(spec, models)
    cam = spec.camera
    result = cast(spec, models)
    depth = result.depth
    hit = np.isfinite(depth) & cam.in_range(np.where(np.isfinite(depth), depth, -1.0))
    if not np.any(hit):
        raise EmptyScene("nothing of the scene lies within the camera's view and range")

    is_part = result.source >= result.n_fixtures
    labels = np.where(is_part, PART, FIXTURE)
    part_index = np.where(is_part, result.source - result.n_fixtures, -1)
    albedos = [f.albedo for f in spec.fixtures] + [p.albedo for p in spec.parts]
    albedo = np.where(result.source >= 0, np.take(albedos, np.clip(result.source, 0, None)), 0.0)

    noise = spec.noise
    rng = np.random.default_rng(spec.seed)
    n = len(depth)
    jitter = rng.standard_normal(n) * noise.depth_sigma
    drop_draw = rng.random(n)
    ghost_draw = rng.random(n)
    ghost_height = rng.uniform(noise.ghost_band[0], noise.ghost_band[1], n)

    cos_incidence = np.abs(np.einsum("ij,ij->i", result.normals, result.dirs)) / np.linalg.norm(result.dirs, axis=1)
    dropped = hit & (cos_incidence < config.Synth.GLANCING_COS) & (drop_draw < noise.dropout_rate)

    # ghosts float above the named fixtures (rollers) along the pixel's ray
    sources = [k for k, f in enumerate(spec.fixtures) if f.name in noise.ghost_sources]
    over_source = np.isin(result.source, sources)
    climb = -result.dirs[:, 2]
    ghost = hit & ~dropped & over_source & (ghost_draw < noise.ghost_rate) & (climb > 0.05)
    measured = np.where(np.isfinite(depth), depth, 0.0) + jitter
    measured = np.where(ghost, measured - ghost_height / np.where(climb > 0.05, climb, 1.0), measured)
    labels = np.where(ghost, GHOST, labels)
    part_index = np.where(ghost, -1, part_index)

    valid = hit & ~dropped & (measured > 0) & cam.in_range(measured)
    values = np.where(valid, measured, np.nan).reshape(cam.height, cam.width)
    image = DepthImage(values, "depth", camera=cam, cam_pose=spec.cam_pose)
    points = result.rays[valid] * measured[valid, None]
    cloud = PointCloud(points, None, albedo[valid], "camera")

    clean = np.where(hit, depth, np.inf)
    truths = []
    for k, part in enumerate(spec.parts):
        model = models[part.model_id]
        own = hit & (result.source == result.n_fixtures + k)
        truths.append(PartTruth(part.model_id, part.pose, spec.cam_H_scene.compose(part.pose),
                                part_visibility(spec, model, part.pose, clean, own), int(own.sum())))
    gt = GroundTruth(truths, labels[valid].astype(np.int64), part_index[valid].astype(np.int64),
                     spec.cam_H_scene)

    log_debug(f"render: {len(cloud)} points, labels {gt.label_counts()}")
    log_info(f"Rendered scene (seed {spec.seed}): {len(cloud)} points, {len(truths)} parts "
             f"in {time.perf_counter() - started:.2f}s")
    return image, cloud, gt
