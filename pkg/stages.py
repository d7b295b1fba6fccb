"""Pipeline stages: parameter specs plus the function each stage runs on a PipelineContext.

Every stage works on the current scene cloud (camera frame unless the input says otherwise)
and may read or fill the other context slots: contrast image, depth edges, planes and pose
hypotheses. Geometric parameters such as z bands, crop boxes and axes are given in the scene
frame (z up, support at z = 0) unless a stage's `frame` parameter says "camera".
"""

import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import config
from error_logger import log_debug, log_warning
from errors import InsufficientDepthPixels, InvalidParameter, NoCorrespondences
from geom.cloud import PointCloud
from geom.depth_image import DepthImage
from geom.normals import estimate_normals
from geom.ply_io import read_ply
from geom.sampling import voxel_downsample
from geom.transforms import RigidTransform
from match2d.contrast import make_contrast_depth_image
from match2d.lift import lift_to_6d
from match2d.shape_match import recognize, shape_match
from match2d.templates import build_template
from match3d.icp import icp_refine
from match3d.ppf import build_ppf_model_for
from match3d.results import MatchResult, sort_results
from match3d.surface_match import MatchParams, match_models
from match3d.workpiece import WorkpieceModel
from refine.filters import (ExclusionBox, background_subtract, crop_box, intensity_filter,
                            normal_direction_filter, statistical_outlier_removal, z_band_filter)
from refine.planes import Plane, segment_and_remove_planes
from refine.report import FilterReport
from refine.edges import extract_depth_edges

REQUIRED = object()

KINDS = ("float", "int", "bool", "str", "vec3", "pair", "str_list", "box")


@dataclass(frozen=True)
class Param:
    """One stage parameter: JSON kind, default (REQUIRED if none) and an optional lower bound."""

    name: str
    kind: str
    default: Any = REQUIRED
    minimum: Optional[float] = None
    exclusive: bool = False
    choices: Optional[Tuple[str, ...]] = None
    doc: str = ""

    @property
    def required(self):
        return self.default is REQUIRED

    def coerce(self, value):
        """(value, None) on success, (None, problem) otherwise. None passes when the default is None."""
        if value is None and self.default is None:
            return None, None
        checker = _COERCERS[self.kind]
        try:
            value = checker(value)
        except (TypeError, ValueError) as e:
            return None, f"parameter '{self.name}' {e}"
        if self.minimum is not None and self.kind in ("float", "int"):
            if value < self.minimum or (self.exclusive and value == self.minimum):
                op = ">" if self.exclusive else ">="
                return None, f"parameter '{self.name}' must be {op} {self.minimum}, got {value}"
        if self.choices is not None and value not in self.choices:
            return None, f"parameter '{self.name}' must be one of {list(self.choices)}, got '{value}'"
        return value, None

    def describe(self):
        default = "required" if self.required else f"default {self.default!r}"
        return f"{self.name} ({self.kind}, {default}){': ' + self.doc if self.doc else ''}"


def _number(value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError("must be a number")
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return float(value)


def _integer(value):
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise TypeError("must be an integer")
    return value


def _boolean(value):
    if not isinstance(value, bool):
        raise TypeError("must be true or false")
    return value


def _string(value):
    if not isinstance(value, str) or not value:
        raise TypeError("must be a non-empty string")
    return value


def _vector(length):
    def check(value):
        if not isinstance(value, (list, tuple)) or len(value) != length:
            raise TypeError(f"must be a list of {length} numbers")
        return [_number(v) for v in value]
    return check


def _string_list(value):
    if not isinstance(value, (list, tuple)):
        raise TypeError("must be a list of strings")
    return [_string(v) for v in value]


def _box(value):
    if not isinstance(value, dict) or set(value) != {"min_corner", "max_corner"}:
        raise TypeError("must be an object with exactly min_corner and max_corner")
    lo, hi = _vector(3)(value["min_corner"]), _vector(3)(value["max_corner"])
    if any(a > b for a, b in zip(lo, hi)):
        raise ValueError("min_corner must be <= max_corner")
    return {"min_corner": lo, "max_corner": hi}


_COERCERS = {
    "float": _number, "int": _integer, "bool": _boolean, "str": _string,
    "vec3": _vector(3), "pair": _vector(2), "str_list": _string_list, "box": _box,
}


@dataclass
class PipelineContext:
    """Mutable state threaded through the stages of one pipeline run on one input."""

    cloud: PointCloud
    scene_frame: RigidTransform
    models: Dict[str, WorkpieceModel]
    seed: int = config.Ransac.SEED
    depth_image: Optional[DepthImage] = None
    image: Optional[DepthImage] = None
    edges: Optional[PointCloud] = None
    planes: List[Plane] = field(default_factory=list)
    results: List[MatchResult] = field(default_factory=list)
    filters: List[FilterReport] = field(default_factory=list)
    cache: Dict[Any, Any] = field(default_factory=dict)

    def model(self, model_id):
        if model_id not in self.models:
            raise InvalidParameter(f"unknown model '{model_id}' (known: {sorted(self.models)})")
        return self.models[model_id]

    def model_ids(self, requested):
        ids = list(requested) if requested else sorted(self.models)
        for model_id in ids:
            self.model(model_id)
        return ids

    def cached(self, key, build):
        """Models, templates and reference clouds are built once per pipeline, not per input."""
        if key not in self.cache:
            self.cache[key] = build()
        return self.cache[key]

    def frame_for(self, name):
        return self.scene_frame if name == "scene" else RigidTransform.identity()


@dataclass(frozen=True)
class Stage:
    name: str
    params: Tuple[Param, ...]
    run: Callable[[PipelineContext, Dict[str, Any]], Optional[FilterReport]]
    check: Optional[Callable[[Dict[str, Any]], Optional[str]]] = None
    doc: str = ""

    def param(self, name):
        return next((p for p in self.params if p.name == name), None)


FRAME = Param("frame", "str", "scene", choices=("scene", "camera"),
              doc="frame the geometric parameters are given in")


# ---------------------------------------------------------------- refinement

def _z_band(ctx, p):
    ctx.cloud, report = z_band_filter(ctx.cloud, ctx.frame_for(p["frame"]), p["z_min"], p["z_max"])
    return report


def _intensity(ctx, p):
    ctx.cloud, report = intensity_filter(ctx.cloud, p["lo"], p["hi"])
    return report


def _normal_direction(ctx, p):
    axis = ctx.frame_for(p["frame"]).apply_vectors(p["axis"])
    ctx.cloud, report = normal_direction_filter(ctx.cloud, axis, p["max_angle"], p["signed"])
    return report


def _crop(ctx, p):
    box = ExclusionBox(ctx.frame_for(p["frame"]), p["min_corner"], p["max_corner"])
    ctx.cloud, report = crop_box(ctx.cloud, box)
    return report


def _voxel(ctx, p):
    started = time.perf_counter()
    before = len(ctx.cloud)
    ctx.cloud = voxel_downsample(ctx.cloud, p["cell"])
    return FilterReport("voxel", before, len(ctx.cloud), time.perf_counter() - started,
                        {"cell": p["cell"]})


def _outliers(ctx, p):
    ctx.cloud, report = statistical_outlier_removal(ctx.cloud, p["k"], p["stddev_mult"])
    return report


def _background(ctx, p):
    reference = ctx.cached(("reference", p["reference"]), lambda: read_ply(p["reference"]))
    ctx.cloud, report = background_subtract(ctx.cloud, reference, p["radius"])
    return report


def _plane_removal(ctx, p):
    exclude = None
    if p["exclude"] is not None:
        exclude = ExclusionBox(ctx.scene_frame, p["exclude"]["min_corner"], p["exclude"]["max_corner"])
    ctx.cloud, planes, report = segment_and_remove_planes(
        ctx.cloud, p["dist_tol"], p["min_inliers"], p["max_planes"], p["remove_dist"], exclude,
        seed=ctx.seed)
    ctx.planes = list(planes)
    return report


def _normals(ctx, p):
    ctx.cloud = estimate_normals(ctx.cloud, p["k"], p["viewpoint"])


def _edges(ctx, p):
    if ctx.depth_image is None or ctx.depth_image.kind != "depth":
        raise InvalidParameter("the edges stage needs a depth-image input")
    ctx.edges = extract_depth_edges(ctx.depth_image, p["min_amplitude"], frame_id=ctx.cloud.frame_id)
    log_debug(f"{len(ctx.edges)} depth edge points")


# ---------------------------------------------------------------- matching

MATCH_KEYS = ("ref_sampling", "trans_tol_rel", "rot_tol", "candidates", "max_results",
              "score_tol", "min_score", "edge_weight", "viewpoint", "scene_step", "flip_gap")


def _surface_match(ctx, p):
    ids = ctx.model_ids(p["models"])
    ppfs = {model_id: ctx.cached(("ppf", model_id, p["model_step"]),
                                 lambda m=ctx.model(model_id): build_ppf_model_for(m, p["model_step"]))
            for model_id in ids}
    params = MatchParams(**{key: p[key] for key in MATCH_KEYS})
    if p["use_edges"]:
        if ctx.edges is None:
            raise InvalidParameter("use_edges needs an earlier edges stage")
        model_edges = {model_id: ctx.model(model_id).edge_cloud for model_id in ids}
        ctx.results = match_models(ctx.cloud, ppfs, params, ctx.edges, model_edges)
    else:
        ctx.results = match_models(ctx.cloud, ppfs, params)


def _icp(ctx, p):
    refined = []
    for result in ctx.results:
        model_cloud = ctx.model(result.model_id).sampled_cloud
        try:
            pose, rms = icp_refine(ctx.cloud, model_cloud, result.pose, p["max_iter"], p["tol"],
                                   p["max_dist"])
        except NoCorrespondences as e:
            log_warning(f"ICP skipped for '{result.model_id}': {e}")
            refined.append(result)
            continue
        refined.append(result.with_pose(pose, rms))
    ctx.results = refined


def _contrast_image(ctx, p):
    value_range = tuple(p["value_range"]) if p["value_range"] is not None else None
    ctx.image = make_contrast_depth_image(ctx.cloud, ctx.scene_frame, p["mm_per_px"],
                                          value_range=value_range)


def _shape_match(ctx, p):
    started = time.perf_counter()
    if ctx.image is None:
        raise InvalidParameter("shape_match needs an earlier contrast_image stage or an intensity input")
    mm_per_px = ctx.image.ortho.mm_per_px if ctx.image.ortho is not None else None
    if mm_per_px is None:
        raise InvalidParameter("shape_match needs an orthographic image")
    ids = ctx.model_ids(p["models"])
    pyramids = {model_id: ctx.cached(("templates", model_id, p["theta_step"], mm_per_px, p["levels"]),
                                     lambda m=ctx.model(model_id): build_template(
                                         m, p["theta_step"], mm_per_px, p["levels"]))
                for model_id in ids}

    if p["recognize"]:
        best = recognize(ctx.image, pyramids, p["min_score"])
        planar = [] if best is None else [best]
    else:
        planar = []
        for model_id in ids:
            planar += shape_match(ctx.image, pyramids[model_id], p["min_score"], p["max_matches"])

    support = Plane.from_normal([0.0, 0.0, 1.0], p["support_z"])
    results = []
    for pm in planar:
        try:
            lifted = lift_to_6d(pm, ctx.image, support, ctx.model(pm.model_id))
        except InsufficientDepthPixels as e:
            log_warning(f"Planar match of '{pm.model_id}' not lifted: {e}")
            continue
        results.append(lifted.with_pose(ctx.scene_frame.compose(lifted.pose)))
    duration = time.perf_counter() - started
    ctx.results = sort_results([r.with_duration(duration) for r in results])


def _band_check(low, high):
    def check(p):
        if not p[low] < p[high]:
            return f"{low} must be < {high}"
        return None
    return check


def _interval_check(p):
    return None if p["lo"] <= p["hi"] else "lo must be <= hi"


def _range_check(key):
    def check(p):
        if p[key] is not None and not p[key][0] < p[key][1]:
            return f"{key} must be increasing"
        return None
    return check


_STAGE_LIST = [
    Stage("z_band", (
        Param("z_min", "float"), Param("z_max", "float"), FRAME,
    ), _z_band, _band_check("z_min", "z_max"), "keep points whose z lies in [z_min, z_max]"),
    Stage("intensity", (
        Param("lo", "float"), Param("hi", "float"),
    ), _intensity, _interval_check, "grey-value thresholding"),
    Stage("normal_direction", (
        Param("axis", "vec3", [0.0, 0.0, 1.0]),
        Param("max_angle", "float", 30.0, minimum=0.0),
        Param("signed", "bool", False), FRAME,
    ), _normal_direction, None, "keep points whose normal is near an axis"),
    Stage("crop", (
        Param("min_corner", "vec3"), Param("max_corner", "vec3"), FRAME,
    ), _crop, lambda p: None if all(a <= b for a, b in zip(p["min_corner"], p["max_corner"]))
        else "min_corner must be <= max_corner", "keep points inside an axis-aligned box"),
    Stage("voxel", (
        Param("cell", "float", config.Model.SAMPLE_STEP, minimum=0.0, exclusive=True),
    ), _voxel, None, "voxel-grid downsampling"),
    Stage("outliers", (
        Param("k", "int", config.Outliers.K_NEIGHBORS, minimum=1),
        Param("stddev_mult", "float", config.Outliers.STDDEV_MULT, minimum=0.0),
    ), _outliers, None, "statistical outlier removal"),
    Stage("background", (
        Param("reference", "str", doc="PLY of the empty scene"),
        Param("radius", "float", 2.0, minimum=0.0, exclusive=True),
    ), _background, None, "drop points near a reference capture"),
    Stage("plane_removal", (
        Param("dist_tol", "float", 1.0, minimum=0.0, exclusive=True),
        Param("min_inliers", "int", 500, minimum=3),
        Param("max_planes", "int", 3, minimum=1),
        Param("remove_dist", "float", 1.5, minimum=0.0, exclusive=True),
        Param("exclude", "box", None, doc="scene-frame box never removed"),
    ), _plane_removal, None, "RANSAC plane segmentation and removal"),
    Stage("normals", (
        Param("k", "int", config.Normals.K_NEIGHBORS, minimum=2),
        Param("viewpoint", "vec3", list(config.Normals.VIEWPOINT)),
    ), _normals, None, "PCA normals oriented towards the viewpoint"),
    Stage("edges", (
        Param("min_amplitude", "float", config.Edges.MIN_AMPLITUDE, minimum=0.0, exclusive=True),
    ), _edges, None, "3D edges from depth discontinuities"),
    Stage("surface_match", (
        Param("models", "str_list", None, doc="model ids, all when omitted"),
        Param("model_step", "float", None, minimum=0.0, exclusive=True),
        Param("use_edges", "bool", False),
        Param("ref_sampling", "int", config.Ppf.REF_SAMPLING, minimum=1),
        Param("trans_tol_rel", "float", config.Clustering.TRANS_TOL_REL, minimum=0.0, exclusive=True),
        Param("rot_tol", "float", config.Clustering.ROT_TOL, minimum=0.0, exclusive=True),
        Param("candidates", "int", config.Clustering.CANDIDATES, minimum=1),
        Param("max_results", "int", config.Clustering.MAX_RESULTS, minimum=1),
        Param("score_tol", "float", None, minimum=0.0, exclusive=True),
        Param("min_score", "float", 0.0, minimum=0.0),
        Param("edge_weight", "float", config.Scoring.EDGE_WEIGHT, minimum=0.0),
        Param("viewpoint", "vec3", [0.0, 0.0, 0.0]),
        Param("scene_step", "float", None, minimum=0.0, exclusive=True),
        Param("flip_gap", "float", config.Clustering.FLIP_SCORE_GAP, minimum=0.0),
    ), _surface_match, lambda p: None if p["min_score"] <= 1.0 and p["edge_weight"] <= 1.0
        else "min_score and edge_weight must be <= 1", "point-pair-feature matching"),
    Stage("icp", (
        Param("max_iter", "int", config.Icp.MAX_ITER, minimum=1),
        Param("tol", "float", config.Icp.TOL, minimum=0.0),
        Param("max_dist", "float", config.Icp.MAX_CORRESPONDENCE, minimum=0.0, exclusive=True),
    ), _icp, None, "point-to-point ICP on every hypothesis"),
    Stage("contrast_image", (
        Param("mm_per_px", "float", config.Shape.MM_PER_PX, minimum=0.0, exclusive=True),
        Param("value_range", "pair", None, doc="scene heights mapped to 0 and 1"),
    ), _contrast_image, _range_check("value_range"), "orthographic height image along the scene normal"),
    Stage("shape_match", (
        Param("models", "str_list", None),
        Param("theta_step", "float", config.Shape.THETA_STEP, minimum=0.0, exclusive=True),
        Param("levels", "int", config.Shape.LEVELS, minimum=1),
        Param("min_score", "float", config.Shape.MIN_SCORE, minimum=0.0),
        Param("max_matches", "int", config.Shape.MAX_MATCHES, minimum=1),
        Param("recognize", "bool", False, doc="keep only the best match across models"),
        Param("support_z", "float", 0.0, doc="height of the supporting plane"),
    ), _shape_match, lambda p: None if p["min_score"] <= 1.0 else "min_score must be <= 1",
        "gradient template matching lifted to 6D"),
]

STAGES: Dict[str, Stage] = {stage.name: stage for stage in _STAGE_LIST}


def describe_stages():
    """Human-readable stage list with parameters and defaults."""
    lines = []
    for stage in _STAGE_LIST:
        lines.append(f"{stage.name}: {stage.doc}")
        lines += [f"    {param.describe()}" for param in stage.params]
    return "\n".join(lines)


def run_stage(ctx: PipelineContext, name, params) -> Optional[FilterReport]:
    """Run one validated stage; filter stages return their report."""
    report = STAGES[name].run(ctx, params)
    if report is not None:
        ctx.filters.append(report)
    return report
