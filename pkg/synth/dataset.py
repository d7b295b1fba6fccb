"""Write rendered scenes to disk: cloud, depth image, preview, scene spec and ground truth."""

import os
from typing import Dict, List, Optional

import config
from error_logger import log_info, log_warning
from geom.image_io import export_preview_png, write_depth_image
from geom.ply_io import write_ply
from match3d.workpiece import WorkpieceModel
from synth.ground_truth import save_ground_truth
from synth.renderer import render
from synth.scene_spec import SceneSpec, save_scene_spec
from synth.scenes import conveyor_scene, framed_pallet_scene, stacked_parts_scene

ARCHETYPES = {
    "framed_pallet": framed_pallet_scene,
    "conveyor": conveyor_scene,
    "stacked": stacked_parts_scene,
}


def write_scene(spec: SceneSpec, out_dir, stem, models: Optional[Dict[str, WorkpieceModel]] = None,
                preview=True) -> Dict[str, str]:
    """Render `spec` and write <stem>.ply, .pgm (+ sidecar), .png, _scene.json and _gt.json.

    Returns the written paths keyed by "cloud", "depth", "preview", "scene" and "truth".
    """
    os.makedirs(out_dir, exist_ok=True)
    image, cloud, gt = render(spec, models)
    base = os.path.join(str(out_dir), stem)
    paths = {
        "cloud": base + config.Files.PLY_EXT,
        "depth": base + config.Files.PGM_EXT,
        "scene": base + "_scene" + config.Files.JSON_EXT,
        "truth": base + "_gt" + config.Files.JSON_EXT,
    }
    write_ply(cloud, paths["cloud"])
    write_depth_image(image, paths["depth"])
    save_scene_spec(spec, paths["scene"])
    save_ground_truth(gt, paths["truth"])
    if preview:
        png = base + config.Files.PNG_EXT
        if export_preview_png(image, png):
            paths["preview"] = png
        else:
            log_warning(f"Preview for {stem} skipped (Pillow unavailable)")
    return paths


def generate_dataset(out_dir, count, archetype="framed_pallet", seed=0, model_id: Optional[str] = "plate",
                     models: Optional[Dict[str, WorkpieceModel]] = None, **scene_options) -> List[Dict[str, str]]:
    """`count` scenes of one archetype with seeds seed, seed + 1, ...; stems are scene_<seed>."""
    if archetype not in ARCHETYPES:
        raise KeyError(f"unknown archetype '{archetype}' (known: {sorted(ARCHETYPES)})")
    build = ARCHETYPES[archetype]
    written = []
    for k in range(count):
        scene_seed = seed + k
        if archetype == "stacked":
            spec = build(scene_seed, model_ids=None if model_id is None else [model_id], models=models,
                         **scene_options)
        else:
            spec = build(scene_seed, model_id=model_id, models=models, **scene_options)
        written.append(write_scene(spec, out_dir, f"scene_{scene_seed:04d}", models))
    log_info(f"Wrote {count} {archetype} scenes to {out_dir}")
    return written
