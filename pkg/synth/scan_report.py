"""Scanning-configuration check: is every part in range, fully in view and densely sampled?"""

from typing import Dict, List, Optional

import numpy as np

import config
from error_logger import log_info
from match3d.workpiece import WorkpieceModel
from synth.renderer import cast, part_visibility, resolve_models
from synth.scene_spec import SceneSpec


def _corners(model: WorkpieceModel):
    k = len(model.outline)
    return np.vstack([np.column_stack([model.outline, np.zeros(k)]),
                      np.column_stack([model.outline, np.full(k, model.thickness)])])


def scan_pose_report(spec: SceneSpec, models: Optional[Dict[str, WorkpieceModel]] = None) -> List[Dict]:
    """One entry per part with in_range, fully_visible, visibility and pixel_density (px/mm^2).

    Pixel density counts the noise-free pixels showing the part per mm^2 of its outline area.
    """
    if not spec.parts:
        return []
    models = resolve_models(spec, models)
    cam = spec.camera
    result = cast(spec, models)
    hit = np.isfinite(result.depth) & cam.in_range(np.where(np.isfinite(result.depth), result.depth, -1.0))
    clean = np.where(hit, result.depth, np.inf)

    report = []
    for k, part in enumerate(spec.parts):
        model = models[part.model_id]
        corners = spec.cam_H_scene.compose(part.pose).apply_points(_corners(model))
        in_range = bool(np.all(cam.in_range(corners[:, 2])))
        own = hit & (result.source == result.n_fixtures + k)
        visibility = part_visibility(spec, model, part.pose, clean, own)
        pixels = int(own.sum())
        report.append({
            "model_id": part.model_id,
            "in_range": in_range,
            "fully_visible": visibility >= config.Synth.FULLY_VISIBLE,
            "visibility": visibility,
            "pixel_count": pixels,
            "pixel_density": pixels / model.area,
        })
        log_info(f"Scan check '{part.model_id}': in range {in_range}, visibility {visibility:.3f}, "
                 f"{pixels / model.area:.4f} px/mm^2")
    return report
