"""
Scene synthesis package for SheetLoc.

Declarative scenes, a z-buffer depth-camera renderer with sensor artifacts, ground truth,
scanning-configuration checks, beacon-plate captures and ready-made scene archetypes.
"""

from .scene_spec import (Box, Cylinder, NoiseSpec, PartPlacement, SceneSpec, load_scene_spec,
                         save_scene_spec)
from .ground_truth import LABELS, GroundTruth, PartTruth, load_ground_truth, save_ground_truth
from .renderer import cast, intersect_box, intersect_cylinder, intersect_part, render
from .scan_report import scan_pose_report
from .beacon_render import render_beacon_plate
from .scenes import (DEFAULT_NOISE, conveyor_scene, default_camera, framed_pallet_scene, overhead_pose,
                     part_pixel_scale, resting_pose, stacked_parts_scene)
from .dataset import ARCHETYPES, generate_dataset, write_scene

__all__ = [
    'Box', 'Cylinder', 'NoiseSpec', 'PartPlacement', 'SceneSpec', 'load_scene_spec', 'save_scene_spec',
    'LABELS', 'GroundTruth', 'PartTruth', 'load_ground_truth', 'save_ground_truth',
    'cast', 'intersect_box', 'intersect_cylinder', 'intersect_part', 'render', 'scan_pose_report',
    'render_beacon_plate', 'DEFAULT_NOISE', 'conveyor_scene', 'default_camera', 'framed_pallet_scene',
    'overhead_pose', 'part_pixel_scale', 'resting_pose', 'stacked_parts_scene',
    'ARCHETYPES', 'generate_dataset', 'write_scene',
]
