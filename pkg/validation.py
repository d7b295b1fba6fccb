"""Pipeline config validation. All functions are pure (no side effects)."""

from typing import Any, Dict

import numpy as np

import config
from errors import InvalidTransform
from geom.transforms import RigidTransform, rotation_error
from stages import STAGES


class ValidationResult:
    """
    Structured validation result object.

    Contains validation status, error message, sanitized value, and the offending
    field (a stage name for stage errors). Works in boolean context (if result:).
    """

    def __init__(self, is_valid: bool, error_message: str = "",
                 sanitized_value: Any = None, error_field: str = ""):
        self.is_valid = is_valid
        self.error_message = error_message
        self.sanitized_value = sanitized_value
        self.error_field = error_field

    def __bool__(self):
        return self.is_valid

    def __repr__(self):
        if self.is_valid:
            return f"ValidationResult(valid, value={self.sanitized_value})"
        return f"ValidationResult(invalid, error='{self.error_message}', field='{self.error_field}')"

    @staticmethod
    def success(value: Any, field: str = ""):
        return ValidationResult(True, "", value, field)

    @staticmethod
    def error(message: str, field: str = ""):
        return ValidationResult(False, message, None, field)


CONFIG_FIELDS = ("name", "stages", "inputs", "output", "models", "seed", "min_score", "scene_frame")
SCENE_FRAME_ORTHO_TOL = 1e-4


class PipelineValidation:
    """Static validators for pipeline configs and their stages."""

    @staticmethod
    def validate_stage(entry, index=0):
        """
        Validate one stage entry {"stage": name, "params": {...}}.

        Unknown parameters are rejected and missing optional ones are filled with their
        defaults, so the sanitized value is the complete parameter set the stage runs with.

        Returns:
            ValidationResult with sanitized_value (name, params); error_field is the stage name
        """
        if not isinstance(entry, dict):
            return ValidationResult.error(f"stage #{index + 1} must be an object", f"stages[{index}]")
        name = entry.get("stage")
        if not isinstance(name, str) or not name:
            return ValidationResult.error(
                config.Messages.CONFIG_MISSING_FIELD.format(field=f"stages[{index}].stage"), f"stages[{index}]")
        stage = STAGES.get(name)
        if stage is None:
            return ValidationResult.error(config.Messages.UNKNOWN_STAGE.format(stage=name), name)

        extra = set(entry) - {"stage", "params"}
        if extra:
            return ValidationResult.error(
                config.Messages.STAGE_PARAM_INVALID.format(stage=name, detail=f"unexpected keys {sorted(extra)}"),
                name)
        raw = entry.get("params", {}) or {}
        if not isinstance(raw, dict):
            return ValidationResult.error(
                config.Messages.STAGE_PARAM_INVALID.format(stage=name, detail="params must be an object"), name)

        unknown = sorted(set(raw) - {p.name for p in stage.params})
        if unknown:
            return ValidationResult.error(
                config.Messages.STAGE_PARAM_INVALID.format(stage=name, detail=f"unknown parameter '{unknown[0]}'"),
                name)

        params: Dict[str, Any] = {}
        for param in stage.params:
            if param.name not in raw:
                if param.required:
                    return ValidationResult.error(
                        config.Messages.STAGE_PARAM_INVALID.format(
                            stage=name, detail=f"missing required parameter '{param.name}'"), name)
                params[param.name] = param.default
                continue
            value, problem = param.coerce(raw[param.name])
            if problem:
                return ValidationResult.error(
                    config.Messages.STAGE_PARAM_INVALID.format(stage=name, detail=problem), name)
            params[param.name] = value

        if stage.check is not None:
            problem = stage.check(params)
            if problem:
                return ValidationResult.error(
                    config.Messages.STAGE_PARAM_INVALID.format(stage=name, detail=problem), name)
        return ValidationResult.success((name, params), name)

    @staticmethod
    def validate_scene_frame(value):
        """4x4 row-major rigid transform, or None for the identity."""
        if value is None:
            return ValidationResult.success(None, "scene_frame")
        try:
            matrix = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            return ValidationResult.error("scene_frame must be a 4x4 matrix", "scene_frame")
        if matrix.shape != (4, 4) or not np.allclose(matrix[3], [0.0, 0.0, 0.0, 1.0]):
            return ValidationResult.error("scene_frame must be a 4x4 homogeneous matrix", "scene_frame")
        # hand-typed matrices carry a few decimals only
        if rotation_error(matrix[:3, :3]) > SCENE_FRAME_ORTHO_TOL:
            return ValidationResult.error("scene_frame rotation is not orthonormal", "scene_frame")
        try:
            frame = RigidTransform.from_matrix(matrix, orthonormalize=True)
        except (InvalidTransform, ValueError) as e:
            return ValidationResult.error(f"scene_frame is not a rigid transform: {e}", "scene_frame")
        return ValidationResult.success(frame, "scene_frame")

    @staticmethod
    def validate_config(data, default_min_score=config.Pipeline.DEFAULT_MIN_SCORE):
        """
        Validate a whole pipeline config.

        Returns the first error encountered, or success with a dict holding the
        sanitized fields: stages as (name, params) pairs and scene_frame as a
        RigidTransform (or None).
        """
        if not isinstance(data, dict):
            return ValidationResult.error("pipeline config must be a JSON object", "config")
        unknown = sorted(set(data) - set(CONFIG_FIELDS))
        if unknown:
            return ValidationResult.error(f"unknown config field '{unknown[0]}'", "config")

        inputs = data.get("inputs")
        if not inputs:
            return ValidationResult.error(config.Messages.CONFIG_MISSING_FIELD.format(field="inputs"), "inputs")
        if not isinstance(inputs, list) or not all(isinstance(p, str) and p for p in inputs):
            return ValidationResult.error("inputs must be a list of file paths", "inputs")

        raw_stages = data.get("stages")
        if not raw_stages:
            return ValidationResult.error(config.Messages.CONFIG_MISSING_FIELD.format(field="stages"), "stages")
        if not isinstance(raw_stages, list):
            return ValidationResult.error("stages must be a list", "stages")
        stages = []
        for index, entry in enumerate(raw_stages):
            result = PipelineValidation.validate_stage(entry, index)
            if not result:
                return result
            stages.append(result.sanitized_value)

        for key in ("name", "output", "models"):
            value = data.get(key)
            if value is not None and (not isinstance(value, str) or not value):
                return ValidationResult.error(f"{key} must be a non-empty string", key)

        seed = data.get("seed", config.Ransac.SEED)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            return ValidationResult.error("seed must be a non-negative integer", "seed")

        min_score = data.get("min_score", default_min_score)
        if isinstance(min_score, bool) or not isinstance(min_score, (int, float)) or not 0.0 <= min_score <= 1.0:
            return ValidationResult.error("min_score must be a number in [0, 1]", "min_score")

        frame = PipelineValidation.validate_scene_frame(data.get("scene_frame"))
        if not frame:
            return frame

        return ValidationResult.success({
            "name": data.get("name"),
            "stages": stages,
            "inputs": list(inputs),
            "output": data.get("output"),
            "models": data.get("models"),
            "seed": seed,
            "min_score": float(min_score),
            "scene_frame": frame.sanitized_value,
        }, "config")
