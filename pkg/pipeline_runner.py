"""Declarative pipeline execution: load a JSON config, run its stages on each input, report poses.

Exit-code contract for supervisors polling the process: 0 when at least one match reaches
min_score, 2 when none does, 1 on any error.
"""

import json
import os
import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

import config
from error_logger import log_debug, log_error, log_info, log_stage
from errors import ConfigValidationError, EmptyScene, InvalidParameter, ParseError, SheetLocError
from geom.cloud import PointCloud
from geom.depth_image import DepthImage
from geom.image_io import read_depth_image
from geom.ply_io import read_ply
from geom.transforms import RigidTransform
from match3d.registry import builtin_models, load_model_registry
from report_manager import InputReport, PoseReport, save_report
from settings_manager import get_settings_manager
from stages import PipelineContext, run_stage
from validation import CONFIG_FIELDS, PipelineValidation

# stage parameters holding file paths, resolved against the config file's folder
PATH_PARAMS = {"background": ("reference",)}


@dataclass(frozen=True)
class StageConfig:
    name: str
    params: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self):
        return {"stage": self.name, "params": dict(self.params)}


@dataclass(frozen=True)
class PipelineConfig:
    """Validated pipeline: ordered stages, inputs, output report path, model registry and seed."""

    stages: List[StageConfig]
    inputs: List[str]
    output: Optional[str] = None
    models: Optional[str] = None
    seed: int = config.Ransac.SEED
    min_score: float = config.Pipeline.DEFAULT_MIN_SCORE
    scene_frame: Optional[RigidTransform] = None
    name: Optional[str] = None

    @staticmethod
    def from_dict(data, default_min_score=None) -> "PipelineConfig":
        """Validate and build; raises ConfigValidationError naming the offending stage."""
        if default_min_score is None:
            default_min_score = get_settings_manager().get_default_min_score()
        result = PipelineValidation.validate_config(data, default_min_score)
        if not result:
            field_name = result.error_field
            stage = None if field_name in CONFIG_FIELDS or field_name == "config" else field_name
            raise ConfigValidationError(result.error_message, stage)
        clean = result.sanitized_value
        return PipelineConfig([StageConfig(name, params) for name, params in clean["stages"]],
                              clean["inputs"], clean["output"], clean["models"], clean["seed"],
                              clean["min_score"], clean["scene_frame"], clean["name"])

    def to_dict(self):
        data = {
            "stages": [s.to_dict() for s in self.stages],
            "inputs": list(self.inputs),
            "seed": self.seed,
            "min_score": self.min_score,
        }
        for key in ("output", "models", "name"):
            if getattr(self, key) is not None:
                data[key] = getattr(self, key)
        if self.scene_frame is not None:
            data["scene_frame"] = self.scene_frame.to_list()
        return data

    def with_inputs(self, inputs, output=None):
        return replace(self, inputs=list(inputs), output=output)

    def resolved(self, base_dir) -> "PipelineConfig":
        """Relative file paths made relative to `base_dir` instead of the working directory."""
        def fix(path):
            return path if path is None or os.path.isabs(path) else os.path.normpath(os.path.join(base_dir, path))

        stages = []
        for stage in self.stages:
            params = dict(stage.params)
            for key in PATH_PARAMS.get(stage.name, ()):
                params[key] = fix(params[key])
            stages.append(StageConfig(stage.name, params))
        return replace(self, stages=stages, inputs=[fix(p) for p in self.inputs],
                       output=fix(self.output), models=fix(self.models))


def load_pipeline_config(path) -> PipelineConfig:
    """Read a JSON pipeline config; relative paths inside it are taken from its folder."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        log_error(f"Invalid JSON in pipeline config {path}", e)
        raise ParseError(f"invalid JSON: {e.msg}", e.lineno)
    except OSError as e:
        log_error(f"Failed to read pipeline config {path}", e)
        raise
    cfg = PipelineConfig.from_dict(data)
    return cfg.resolved(os.path.dirname(os.path.abspath(str(path))))


def cloud_from_depth_image(img: DepthImage, frame_id="camera") -> PointCloud:
    """Back-project every valid pixel centre of a perspective depth image."""
    img.require_kind("depth")
    if img.camera is None:
        raise InvalidParameter("depth image has no camera model to back-project through")
    rows, cols = np.nonzero(img.mask)
    points = img.camera.back_project(cols + 0.5, rows + 0.5, img.values[rows, cols])
    return PointCloud(points, frame_id=frame_id)


def load_input(path) -> Tuple[PointCloud, Optional[DepthImage], Optional[DepthImage]]:
    """(cloud, depth image, intensity image) for a PLY cloud or a PGM image.

    A perspective depth PGM is back-projected; an orthographic intensity PGM feeds the
    shape matcher directly and leaves the cloud empty.
    """
    ext = os.path.splitext(str(path))[1].lower()
    if ext == config.Files.PLY_EXT:
        return read_ply(path), None, None
    if ext == config.Files.PGM_EXT:
        img = read_depth_image(path)
        if img.kind == "depth":
            return cloud_from_depth_image(img), img, None
        if img.ortho is None:
            raise InvalidParameter(f"{path}: intensity input must be an orthographic contrast image")
        return PointCloud.empty(), None, img
    raise InvalidParameter(f"{path}: unsupported input type '{ext}' (expected .ply or .pgm)")


def _scene_frame(cfg: PipelineConfig, depth_image: Optional[DepthImage]):
    if cfg.scene_frame is not None:
        return cfg.scene_frame
    if depth_image is not None and depth_image.cam_pose is not None:
        return depth_image.cam_pose.inverse()
    return RigidTransform.identity()


def run_input(cfg: PipelineConfig, path, models, cache) -> InputReport:
    """Run every stage on one input."""
    started = time.perf_counter()
    cloud, depth_image, image = load_input(path)
    if cloud.is_empty() and image is None:
        raise EmptyScene(f"{path}: {config.Messages.EMPTY_SCENE}")

    ctx = PipelineContext(cloud, _scene_frame(cfg, depth_image), models, cfg.seed,
                          depth_image=depth_image, image=image, cache=cache)
    report = InputReport(str(path), points_in=len(cloud))
    for stage in cfg.stages:
        stage_started = time.perf_counter()
        try:
            run_stage(ctx, stage.name, stage.params)
        except SheetLocError as e:
            log_error(f"Stage '{stage.name}' failed on {path}", e)
            raise
        duration = time.perf_counter() - stage_started
        report.stages.append({"stage": stage.name, "duration": duration, "points_out": len(ctx.cloud)})
        log_stage(stage.name, duration)

    report.results = list(ctx.results)
    report.filters = list(ctx.filters)
    report.duration = time.perf_counter() - started
    best = report.best()
    if best is not None:
        log_info(f"{os.path.basename(str(path))}: best '{best.model_id}' score {best.score:.3f} "
                 f"in {report.duration:.3f}s")
    else:
        log_info(f"{os.path.basename(str(path))}: no pose hypotheses in {report.duration:.3f}s")
    return report


def run_pipeline(cfg: PipelineConfig, write=True, models=None, cache: Optional[Dict] = None) -> PoseReport:
    """Execute the stages in order on every input; writes the report when cfg.output is set.

    Library errors (EmptyScene, ParseError, ...) propagate to the caller.
    """
    started = time.perf_counter()
    if models is None:
        models = load_model_registry(cfg.models) if cfg.models else builtin_models()
    cache = {} if cache is None else cache

    reports = [run_input(cfg, path, models, cache) for path in cfg.inputs]
    report = PoseReport(reports, time.perf_counter() - started, cfg.min_score, cfg.seed, cfg.name)
    if not report.found:
        log_info(config.Messages.NO_MATCH.format(min_score=cfg.min_score))
    if write and cfg.output:
        save_report(report, cfg.output)
    log_debug(f"Pipeline finished: {len(reports)} inputs in {report.total_duration:.3f}s")
    return report


def exit_code(report: PoseReport) -> int:
    return report.exit_code()
