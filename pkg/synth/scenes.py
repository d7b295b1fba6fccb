"""Scene archetypes: framed pallet, roller conveyor and stacked parts.

Scene frame: z up, the supporting surface at z = 0. The camera hangs above the scene
looking down, optionally tilted about the scene x axis.
"""

from typing import Dict, Optional, Sequence

import numpy as np

from geom.camera import CameraModel
from geom.transforms import RigidTransform
from match3d.registry import builtin_models
from match3d.workpiece import WorkpieceModel
from synth.scene_spec import Box, Cylinder, NoiseSpec, PartPlacement, SceneSpec

DEFAULT_NOISE = NoiseSpec(depth_sigma=0.3, dropout_rate=0.02, ghost_rate=0.002)

# camera z axis along -scene z, image rows along -scene y
LOOK_DOWN = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])


def default_camera(focal_length_px=400.0, width=256, height=192, z_range=(300.0, 2000.0)) -> CameraModel:
    return CameraModel.centered(focal_length_px, width, height, z_range)


def overhead_pose(height, tilt_deg=0.0, xy=(0.0, 0.0)) -> RigidTransform:
    """scene_H_cam for a camera `height` mm above (x, y) looking down, tilted about scene x."""
    tilt = RigidTransform.from_axis_angle([1.0, 0.0, 0.0], tilt_deg).rotation
    return RigidTransform(tilt @ LOOK_DOWN, [xy[0], xy[1], height])


def resting_pose(model: WorkpieceModel, x, y, theta_deg, z=0.0, flipped=False) -> RigidTransform:
    """Pose putting the model flat at height z with its outline centroid over (x, y)."""
    spin = RigidTransform.from_axis_angle([0.0, 0.0, 1.0], theta_deg).rotation
    if flipped:
        spin = spin @ np.diag([1.0, -1.0, -1.0])
        z = z + model.thickness
    centroid = np.array([model.centroid[0], model.centroid[1], 0.0])
    return RigidTransform(spin, np.array([x, y, z]) - spin @ centroid)


def _pick(models, model_id, rng):
    if model_id is None:
        model_id = sorted(models)[int(rng.integers(len(models)))]
    return model_id, models[model_id]


def framed_pallet_scene(seed=0, model_id: Optional[str] = "plate", noise: Optional[NoiseSpec] = None,
                        models: Optional[Dict[str, WorkpieceModel]] = None, height=800.0,
                        floor_size=(480.0, 360.0), frame_height=60.0, camera: Optional[CameraModel] = None,
                        tilt_deg=0.0) -> SceneSpec:
    """One part lying on a pallet floor inside a raised wooden frame.

    Position and rotation of the part are drawn from `seed`; model_id None draws the model too.
    """
    rng = np.random.default_rng(seed)
    models = builtin_models() if models is None else models
    model_id, model = _pick(models, model_id, rng)
    fx, fy = floor_size
    wall = 20.0
    fixtures = [Box((fx, fy, 20.0), RigidTransform.from_translation([0, 0, -10.0]), "pallet_floor")]
    for sx in (-1, 1):
        fixtures.append(Box((wall, fy, frame_height),
                            RigidTransform.from_translation([sx * (fx - wall) / 2, 0, frame_height / 2]), "frame"))
    for sy in (-1, 1):
        fixtures.append(Box((fx - 2 * wall, wall, frame_height),
                            RigidTransform.from_translation([0, sy * (fy - wall) / 2, frame_height / 2]), "frame"))

    x, y = rng.uniform(-0.15 * fx, 0.15 * fx), rng.uniform(-0.15 * fy, 0.15 * fy)
    theta = rng.uniform(0.0, 360.0)
    parts = [PartPlacement(model_id, resting_pose(model, x, y, theta))]
    return SceneSpec(fixtures, parts, camera or default_camera(), overhead_pose(height, tilt_deg),
                     DEFAULT_NOISE if noise is None else noise, seed)


def conveyor_scene(seed=0, model_id: Optional[str] = "plate", noise: Optional[NoiseSpec] = None,
                   models: Optional[Dict[str, WorkpieceModel]] = None, height=800.0, tilt_deg=0.0,
                   n_rollers=8, roller_radius=25.0, pitch=70.0, roller_length=900.0,
                   camera: Optional[CameraModel] = None, with_part=True) -> SceneSpec:
    """Rollers along scene x, tops at z = 0, with an optional part resting across them.

    Ghost points float above the rollers when the noise spec asks for them.
    """
    rng = np.random.default_rng(seed)
    models = builtin_models() if models is None else models
    offsets = (np.arange(n_rollers) - (n_rollers - 1) / 2.0) * pitch
    fixtures = [Cylinder(roller_radius, roller_length,
                         RigidTransform.from_translation([0.0, float(y), -roller_radius]), "roller")
                for y in offsets]
    parts = []
    if with_part:
        model_id, model = _pick(models, model_id, rng)
        x, y = rng.uniform(-100.0, 100.0), rng.uniform(-0.2, 0.2) * pitch * n_rollers / 2
        parts.append(PartPlacement(model_id, resting_pose(model, x, y, rng.uniform(0.0, 360.0))))
    noise = NoiseSpec(0.3, 0.02, 0.01) if noise is None else noise
    return SceneSpec(fixtures, parts, camera or default_camera(), overhead_pose(height, tilt_deg), noise, seed)


def stacked_parts_scene(seed=0, model_ids: Optional[Sequence[str]] = None, count=3,
                        noise: Optional[NoiseSpec] = None, models: Optional[Dict[str, WorkpieceModel]] = None,
                        height=800.0, skew_deg=25.0, shift=15.0, camera: Optional[CameraModel] = None) -> SceneSpec:
    """`count` parts piled on a plain floor, each one thickness above the previous.

    Every layer is rotated by up to `skew_deg` and shifted by up to `shift` mm, so the
    top part is fully visible and the lower ones only in part.
    """
    rng = np.random.default_rng(seed)
    models = builtin_models() if models is None else models
    fixtures = [Box((600.0, 450.0, 20.0), RigidTransform.from_translation([0, 0, -10.0]), "floor")]
    base_theta = rng.uniform(0.0, 360.0)
    parts = []
    z = 0.0
    for k in range(count):
        model_id = model_ids[k % len(model_ids)] if model_ids else "plate"
        model = models[model_id]
        theta = base_theta + rng.uniform(-skew_deg, skew_deg)
        x, y = rng.uniform(-shift, shift, 2)
        parts.append(PartPlacement(model_id, resting_pose(model, x, y, theta, z)))
        z += model.thickness
    return SceneSpec(fixtures, parts, camera or default_camera(), overhead_pose(height),
                     DEFAULT_NOISE if noise is None else noise, seed)


def part_pixel_scale(spec: SceneSpec):
    """Approximate mm per pixel at the supporting surface."""
    return float(spec.cam_pose.translation[2] / spec.camera.focal_length_px)

