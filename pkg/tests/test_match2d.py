import numpy as np
import pytest

from conftest import flat_grid
from errors import (EmptyCloud, InsufficientDepthPixels, InvalidParameter, ModelCacheVersionError,
                    WrongImageKind)
from geom.cloud import PointCloud, apply
from geom.depth_image import DepthImage, OrthoGrid
from geom.transforms import RigidTransform, pose_error
from match2d import (PlanarMatch, build_template, lift_to_6d, load_templates,
                     make_contrast_depth_image, part_pixels, recognize, render_outline_image,
                     save_templates, shape_match)
from match2d.templates import rotation_cos_sin
from refine.planes import Plane

MM_PER_PX = 2.0
SHAPE = (160, 200)


@pytest.fixture(scope="module")
def pyramids(models):
    return {mid: build_template(models[mid], theta_step=5.0, mm_per_px=MM_PER_PX, levels=2)
            for mid in ("l_bracket", "t_plate")}


def _angle_gap(a, b):
    return abs((a - b + 180.0) % 360.0 - 180.0)


def _bracket_image(models, u=100, v=80, theta=30.0):
    values = render_outline_image([(models["l_bracket"], u, v, theta, 1.0)], SHAPE, MM_PER_PX,
                                  background=0.2, sigma=1.0)
    return DepthImage(values, "intensity")


def test_rotation_cos_sin_is_exact_on_quarter_turns():
    assert rotation_cos_sin(90.0) == (0.0, 1.0)
    assert rotation_cos_sin(-180.0) == (-1.0, 0.0)
    c, s = rotation_cos_sin(30.0)
    assert c == pytest.approx(np.sqrt(3) / 2) and s == pytest.approx(0.5)


def test_template_grid(pyramids):
    tpl = pyramids["l_bracket"]
    assert len(tpl.templates[0]) == 72 and len(tpl.templates[1]) == 36
    assert tpl.resolution(1) == 4.0 and tpl.step(1) == 10.0
    assert tpl.template_at(0, 92.0).theta == 90.0
    assert tpl.template_at(0, 361.0).theta == 0.0
    t = tpl.templates[0][0]
    np.testing.assert_allclose(np.linalg.norm(t.gradients, axis=1), 1.0)
    extent = t.offsets.max(axis=0) - t.offsets.min(axis=0)
    assert 53 <= extent[0] <= 56 and 43 <= extent[1] <= 46


def test_template_step_must_divide_a_full_turn(models):
    with pytest.raises(InvalidParameter):
        build_template(models["plate"], theta_step=7.0)
    with pytest.raises(InvalidParameter):
        build_template(models["plate"], theta_step=5.0, levels=0)


def test_shape_match_finds_the_rendered_part(models, pyramids):
    matches = shape_match(_bracket_image(models), pyramids["l_bracket"], min_score=0.5)
    best = matches[0]
    assert best.model_id == "l_bracket"
    assert best.score >= 0.8
    assert abs(best.u - 100) <= 1.0 and abs(best.v - 80) <= 1.0
    assert _angle_gap(best.theta, 30.0) <= 3.0


def test_shape_match_on_blank_or_invalid_images(pyramids):
    tpl = pyramids["l_bracket"]
    assert shape_match(DepthImage(np.full(SHAPE, 0.4), "intensity"), tpl) == []
    assert shape_match(DepthImage(np.full(SHAPE, np.nan), "intensity"), tpl) == []


def test_shape_match_checks_resolution(models, pyramids):
    grid = OrthoGrid(RigidTransform.identity(), 1.0, (0.0, 0.0), (0.0, 3.0))
    img = DepthImage(np.zeros(SHAPE), "intensity", ortho=grid)
    with pytest.raises(InvalidParameter):
        shape_match(img, pyramids["l_bracket"])
    with pytest.raises(InvalidParameter):
        shape_match(_bracket_image(models), pyramids["l_bracket"], min_score=1.5)


def test_recognize_names_the_part(models, pyramids):
    best = recognize(_bracket_image(models, u=90, v=85, theta=120.0), pyramids, min_score=0.5)
    assert best is not None
    assert best.model_id == "l_bracket"
    assert _angle_gap(best.theta, 120.0) <= 3.0
    with pytest.raises(InvalidParameter):
        recognize(_bracket_image(models), {})


def _height_image(models, u, v, theta):
    """Top face of the bracket 3 mm above a floor at 0, on a 2 mm grid anchored at the origin."""
    inside = render_outline_image([(models["l_bracket"], u, v, theta, 1.0)], SHAPE, MM_PER_PX)
    grid = OrthoGrid(RigidTransform.identity(), MM_PER_PX, (0.0, 0.0), (0.0, 3.0))
    return DepthImage(inside, "intensity", ortho=grid)


def test_lift_places_the_top_face_on_the_support(models):
    m = models["l_bracket"]
    img = _height_image(models, 100, 80, 30.0)
    pm = PlanarMatch(100.0, 80.0, 30.0, 0, 0.9, "l_bracket")
    result = lift_to_6d(pm, img, Plane([0, 0, 1.0], 0.0), m)

    cx, cy = m.centroid
    np.testing.assert_allclose(result.pose.apply_points([[cx, cy, 3.0]]), [[200.0, 160.0, 3.0]], atol=1e-9)
    np.testing.assert_allclose(result.pose.apply_points([[cx, cy, 0.0]]), [[200.0, 160.0, 0.0]], atol=1e-9)
    expected = RigidTransform.from_axis_angle([0, 0, 1], 30.0)
    assert pose_error(RigidTransform(result.pose.rotation, np.zeros(3)), expected)[1] < 1e-9
    assert result.score == 0.9 and result.model_id == "l_bracket"


def test_lift_tilts_with_the_support_normal(models):
    tilt = np.array([0.0, np.sin(np.deg2rad(2.0)), np.cos(np.deg2rad(2.0))])
    result = lift_to_6d(PlanarMatch(100.0, 80.0, 0.0, 0, 0.7, "l_bracket"),
                        _height_image(models, 100, 80, 0.0), Plane(tilt, 0.0), models["l_bracket"])
    np.testing.assert_allclose(result.pose.rotation[:, 2], tilt, atol=1e-12)


def test_part_pixels_are_eroded(models):
    m = models["l_bracket"]
    img = _height_image(models, 100, 80, 0.0)
    pm = PlanarMatch(100.0, 80.0, 0.0, 0, 0.9)
    full = part_pixels(pm, img, m, erode=0)
    eroded = part_pixels(pm, img, m)
    np.testing.assert_array_equal(full, img.values == 1.0)
    assert eroded.sum() < full.sum()
    assert not np.any(eroded & ~full)


def test_lift_rejects_bad_inputs(models):
    m = models["l_bracket"]
    img = _height_image(models, 100, 80, 0.0)
    pm = PlanarMatch(100.0, 80.0, 0.0, 0, 0.9, "l_bracket")
    with pytest.raises(InvalidParameter):
        lift_to_6d(PlanarMatch(100.0, 80.0, 0.0, 0, 0.9, "plate"), img, Plane([0, 0, 1.0], 0.0), m)
    with pytest.raises(WrongImageKind):
        lift_to_6d(pm, DepthImage(img.values, "depth", ortho=img.ortho), Plane([0, 0, 1.0], 0.0), m)
    hollow = img.with_values(np.full(SHAPE, np.nan))
    with pytest.raises(InsufficientDepthPixels):
        lift_to_6d(pm, hollow, Plane([0, 0, 1.0], 0.0), m)


def test_contrast_image_maps_heights_to_grey():
    floor = flat_grid(40, 40, step=1.0, z=0.0)
    raised = PointCloud([[10.2, 10.2, 5.0], [10.8, 11.1, 4.0]])
    cloud = PointCloud.concat([floor, raised])
    img = make_contrast_depth_image(cloud, RigidTransform.identity(), 2.0)
    assert img.kind == "intensity"
    assert img.ortho.value_range == (0.0, 5.0)
    assert img.values[5, 5] == 1.0
    assert np.nansum(img.values) == 1.0

    cam_H_scene = RigidTransform.from_euler_deg("xyz", [170.0, 5.0, 20.0], [10.0, -40.0, 900.0])
    seen = make_contrast_depth_image(apply(cam_H_scene, cloud), cam_H_scene, 2.0)
    np.testing.assert_allclose(seen.values, img.values, atol=1e-9)


def test_contrast_image_needs_points():
    with pytest.raises(EmptyCloud):
        make_contrast_depth_image(PointCloud.empty(), RigidTransform.identity(), 1.0)


def test_template_cache_round_trip(tmp_path, pyramids):
    path = tmp_path / "tpl.npz"
    save_templates(pyramids["t_plate"], path)
    back = load_templates(path)
    assert back.model_id == "t_plate" and back.levels == 2
    np.testing.assert_array_equal(back.templates[1][3].offsets, pyramids["t_plate"].templates[1][3].offsets)

    stale = tmp_path / "stale.npz"
    np.savez(stale, version=np.int64(0))
    with pytest.raises(ModelCacheVersionError):
        load_templates(stale)
