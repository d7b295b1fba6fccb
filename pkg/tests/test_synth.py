from pathlib import Path

import numpy as np
import pytest

from conftest import QUIET
from errors import EmptyScene, InvalidParameter, ParseError, SheetLocError
from geom.cloud import apply
from geom.transforms import RigidTransform
from synth import (ARCHETYPES, Box, NoiseSpec, PartPlacement, SceneSpec, conveyor_scene, default_camera,
                   framed_pallet_scene, generate_dataset, intersect_box, intersect_cylinder,
                   load_ground_truth, load_scene_spec, overhead_pose, render, resting_pose,
                   save_ground_truth, save_scene_spec, scan_pose_report, stacked_parts_scene)
from synth.ground_truth import GHOST
from synth.scene_spec import Cylinder


def test_noise_spec_validation():
    with pytest.raises(InvalidParameter):
        NoiseSpec(depth_sigma=-0.1)
    with pytest.raises(InvalidParameter):
        NoiseSpec(ghost_rate=1.5)
    with pytest.raises(InvalidParameter):
        NoiseSpec(ghost_band=(10.0, 5.0))
    assert NoiseSpec(ghost_band=[1, 2]).ghost_band == (1.0, 2.0)


def test_scene_needs_a_camera():
    with pytest.raises(InvalidParameter):
        SceneSpec([], [])


def test_box_hit_from_above():
    box = Box((100.0, 100.0, 20.0), RigidTransform.from_translation([0, 0, -10.0]))
    dirs = np.array([[0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
    t, normals = intersect_box(box, np.array([0.0, 0.0, 500.0]), dirs)
    assert t[0] == pytest.approx(500.0)
    assert np.isinf(t[1])
    np.testing.assert_allclose(normals[0], [0, 0, 1.0])


def test_cylinder_hit_on_the_side():
    roller = Cylinder(25.0, 900.0, RigidTransform.from_translation([0.0, 0.0, -25.0]))
    t, normals = intersect_cylinder(roller, np.array([0.0, 0.0, 800.0]), np.array([[0.0, 0.0, -1.0]]))
    assert t[0] == pytest.approx(800.0)
    np.testing.assert_allclose(normals[0], [0, 0, 1.0], atol=1e-12)


def test_overhead_camera_looks_down():
    pose = overhead_pose(800.0)
    np.testing.assert_allclose(pose.apply_vectors([[0, 0, 1.0]]), [[0, 0, -1.0]])
    np.testing.assert_allclose(pose.translation, [0, 0, 800.0])


def test_resting_pose_puts_the_centroid_over_xy(models):
    plate = models["plate"]
    cx, cy = plate.centroid
    pose = resting_pose(plate, 10.0, -5.0, 40.0)
    np.testing.assert_allclose(pose.apply_points([[cx, cy, 0.0]]), [[10.0, -5.0, 0.0]], atol=1e-9)
    flipped = resting_pose(plate, 10.0, -5.0, 40.0, flipped=True)
    # the former top face now rests on the support
    np.testing.assert_allclose(flipped.apply_points([[cx, cy, plate.thickness]]), [[10.0, -5.0, 0.0]],
                               atol=1e-9)


def test_quiet_render_labels_and_geometry(pallet_render):
    spec, image, cloud, gt = pallet_render
    assert cloud.frame_id == "camera"
    assert len(gt.labels) == len(cloud) == np.count_nonzero(~np.isnan(image.values))
    assert gt.label_counts()["ghost"] == 0

    truth = gt.parts[0]
    assert truth.model_id == "plate"
    assert truth.pixel_count == gt.part_mask(0).sum() > 0
    assert truth.visibility >= 0.99
    assert truth.cam_pose.almost_equal(spec.cam_H_scene.compose(truth.pose))

    on_part = apply(spec.cam_pose, cloud.select(gt.part_mask(0)), "scene")
    assert on_part.points[:, 2].min() >= -1e-6
    assert on_part.points[:, 2].max() <= 3.0 + 1e-6


def test_render_is_deterministic_per_seed():
    spec = framed_pallet_scene(seed=5)
    _, first, _ = render(spec)
    _, again, _ = render(spec)
    np.testing.assert_array_equal(first.points, again.points)
    _, other, _ = render(spec.with_seed(6))
    assert len(other) != len(first) or not np.array_equal(other.points, first.points)


def test_ghosts_float_above_the_rollers():
    spec = conveyor_scene(seed=2)
    _, _, gt = render(spec)
    assert 0.0 < gt.ghost_fraction() < 0.03
    ghosts = gt.labels == GHOST
    assert np.all(gt.part_index[ghosts] == -1)


def test_every_ghost_rises_from_a_roller_surface():
    clean_spec = conveyor_scene(seed=2, noise=QUIET)
    ghost_spec = conveyor_scene(seed=2, noise=NoiseSpec(ghost_rate=0.05))
    _, clean, _ = render(clean_spec)
    _, cloud, gt = render(ghost_spec)
    # no jitter and no dropout: both renders keep the same pixels in the same order
    assert len(cloud) == len(clean)
    ghosts = gt.labels == GHOST
    assert ghosts.any()

    below = apply(clean_spec.cam_pose, clean, "scene").points[ghosts]
    above = apply(ghost_spec.cam_pose, cloud, "scene").points[ghosts]
    lo, hi = ghost_spec.noise.ghost_band
    rise = above[:, 2] - below[:, 2]
    assert np.all((rise >= lo - 1e-6) & (rise <= hi + 1e-6))

    # rollers: radius 25, axes along x at z = -25, pitch 70
    axes_y = (np.arange(8) - 3.5) * 70.0
    radial = np.hypot(below[:, 1, None] - axes_y, below[:, 2, None] + 25.0)
    assert np.all(radial.min(axis=1) <= 25.0 + 1e-6)


def test_scenes_without_rollers_have_no_ghosts():
    _, _, gt = render(framed_pallet_scene(seed=11, noise=NoiseSpec(0.3, 0.02, 0.2)))
    assert gt.label_counts()["ghost"] == 0

    frame_ghosts = NoiseSpec(0.3, 0.02, 0.2, ghost_sources=("frame", "pallet_floor"))
    _, _, gt = render(framed_pallet_scene(seed=11, noise=frame_ghosts))
    assert gt.ghost_fraction() > 0.0
    with pytest.raises(InvalidParameter):
        NoiseSpec(ghost_sources="roller")


def test_render_out_of_range_raises():
    spec = framed_pallet_scene(seed=1, noise=QUIET, camera=default_camera(z_range=(1000.0, 2000.0)))
    with pytest.raises(EmptyScene):
        render(spec)


def test_unknown_model_is_rejected():
    spec = SceneSpec([], [PartPlacement("nope", RigidTransform.identity())], default_camera(),
                     overhead_pose(800.0))
    with pytest.raises(InvalidParameter):
        render(spec)


def test_stacked_parts_hide_the_lower_layers():
    _, _, gt = render(stacked_parts_scene(seed=1, noise=QUIET))
    assert len(gt.parts) == 3
    assert gt.parts[-1].visibility >= 0.99
    assert all(p.visibility < 0.9 for p in gt.parts[:-1])


def test_scan_report_matches_the_render(pallet_render):
    spec, _, _, gt = pallet_render
    (entry,) = scan_pose_report(spec)
    assert entry["model_id"] == "plate"
    assert entry["in_range"]
    assert entry["pixel_count"] == gt.parts[0].pixel_count
    assert entry["visibility"] == pytest.approx(gt.parts[0].visibility)
    assert entry["pixel_density"] > 0


def test_scan_report_flags_a_part_out_of_range():
    spec = framed_pallet_scene(seed=3, noise=QUIET, camera=default_camera(z_range=(850.0, 2000.0)))
    (entry,) = scan_pose_report(spec)
    assert not entry["in_range"]
    assert not entry["fully_visible"]
    assert entry["visibility"] == 0.0 and entry["pixel_count"] == 0


def test_scan_report_without_parts():
    assert scan_pose_report(conveyor_scene(seed=0, with_part=False)) == []


def test_scene_spec_save_and_load(tmp_path):
    spec = conveyor_scene(seed=4, noise=NoiseSpec(0.1, 0.0, 0.0))
    path = tmp_path / "scene.json"
    save_scene_spec(spec, path)
    back = load_scene_spec(path)
    assert back.fixtures == spec.fixtures
    assert back.noise == spec.noise and back.seed == 4
    assert back.camera == spec.camera
    assert back.cam_pose.almost_equal(spec.cam_pose)
    assert back.parts[0].pose.almost_equal(spec.parts[0].pose)

    path.write_text("{ not json")
    with pytest.raises(ParseError):
        load_scene_spec(path)


def test_ground_truth_save_load_and_tamper_check(tmp_path, pallet_render):
    _, _, _, gt = pallet_render
    path = tmp_path / "gt.json"
    save_ground_truth(gt, path)
    back = load_ground_truth(path)
    np.testing.assert_array_equal(back.labels, gt.labels)
    np.testing.assert_array_equal(back.part_index, gt.part_index)
    assert back.parts[0].pose.almost_equal(gt.parts[0].pose)
    assert back.parts[0].pixel_count == gt.parts[0].pixel_count

    path.write_text(path.read_text().replace('"model_id": "plate"', '"model_id": "plat"', 1))
    with pytest.raises(SheetLocError):
        load_ground_truth(path)
    assert load_ground_truth(path, verify=False).parts[0].model_id == "plat"


def test_generate_dataset_writes_every_file(tmp_path):
    written = generate_dataset(tmp_path, 2, archetype="framed_pallet", seed=20, noise=QUIET)
    assert len(written) == 2
    for paths in written:
        assert all(Path(paths[key]).exists() for key in ("cloud", "depth", "scene", "truth"))
    assert [Path(p["cloud"]).stem for p in written] == ["scene_0020", "scene_0021"]
    assert Path(written[0]["depth"]).with_suffix(".json").exists()
    with pytest.raises(KeyError):
        generate_dataset(tmp_path, 1, archetype="bin")
    assert set(ARCHETYPES) == {"framed_pallet", "conveyor", "stacked"}
