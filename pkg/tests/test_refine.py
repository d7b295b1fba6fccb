import numpy as np
import pytest

from conftest import flat_grid
from errors import InvalidParameter, MissingChannel, TooFewPoints, WrongImageKind
from geom.cloud import PointCloud
from geom.depth_image import DepthImage
from geom.transforms import RigidTransform
from refine import (ExclusionBox, Plane, background_subtract, crop_box, edge_mask,
                    extract_depth_edges, fit_planes_ransac, intensity_filter, normal_direction_filter,
                    remove_near_planes, required_iterations, segment_and_remove_planes,
                    statistical_outlier_removal, z_band_filter)


def test_z_band_keeps_exactly_the_band(random_cloud):
    c = random_cloud(500)
    out, report = z_band_filter(c, RigidTransform.identity(), -20.0, 30.0)
    expected = (c.points[:, 2] >= -20.0) & (c.points[:, 2] <= 30.0)
    np.testing.assert_array_equal(out.points, c.points[expected])
    assert report.points_in == 500
    assert report.points_out == expected.sum()
    assert report.removed == 500 - expected.sum()


def test_z_band_is_idempotent(random_cloud):
    c = random_cloud(300)
    frame = RigidTransform.from_axis_angle([1, 0, 0], 20.0, [0, 0, 10.0])
    once, _ = z_band_filter(c, frame, 0.0, 50.0)
    twice, _ = z_band_filter(once, frame, 0.0, 50.0)
    np.testing.assert_array_equal(once.points, twice.points)


def test_z_band_rejects_empty_range(random_cloud):
    with pytest.raises(InvalidParameter):
        z_band_filter(random_cloud(5), RigidTransform.identity(), 10.0, 10.0)


def test_z_band_follows_a_slightly_tilted_support():
    # 2 m of floor seen from 1.5 m: a 0.15 degree tilt lifts the far edge by ~2.6 mm
    tilt = RigidTransform.from_axis_angle([0, 1, 0], 0.15)
    xs, ys = np.meshgrid(np.linspace(-1000, 1000, 81), np.linspace(-300, 300, 13))
    floor = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(xs.size)])
    part = np.column_stack([np.linspace(-50, 50, 20), np.zeros(20), np.full(20, 5.0)])
    c = PointCloud(tilt.apply_points(np.vstack([floor, part])))

    kept, _ = z_band_filter(c, tilt, 2.0, 10.0)
    assert len(kept) == len(part)
    leaked, _ = z_band_filter(c, RigidTransform.identity(), 2.0, 10.0)
    assert len(leaked) > len(part)


def test_intensity_filter_needs_the_channel(random_cloud):
    c = random_cloud(100, intensities=True)
    out, _ = intensity_filter(c, 0.25, 0.5)
    assert np.all((out.intensities >= 0.25) & (out.intensities <= 0.5))
    assert len(out) == np.sum((c.intensities >= 0.25) & (c.intensities <= 0.5))
    with pytest.raises(MissingChannel):
        intensity_filter(random_cloud(10), 0.0, 1.0)


def test_normal_direction_filter_signed_and_unsigned():
    normals = [[0, 0, 1.0], [0, 0, -1.0], [1.0, 0, 0], [0, np.sin(np.deg2rad(20)), np.cos(np.deg2rad(20))]]
    c = PointCloud(np.zeros((4, 3)), normals)
    unsigned, _ = normal_direction_filter(c, [0, 0, 1], 30.0)
    assert len(unsigned) == 3
    signed, _ = normal_direction_filter(c, [0, 0, 1], 30.0, signed=True)
    np.testing.assert_allclose(signed.normals[:, 2], [1.0, np.cos(np.deg2rad(20))])
    with pytest.raises(MissingChannel):
        normal_direction_filter(PointCloud(np.zeros((1, 3))), [0, 0, 1], 10.0)


def test_crop_box_in_a_rotated_frame():
    frame = RigidTransform.from_axis_angle([0, 0, 1], 45.0, [100.0, 0.0, 0.0])
    inside = frame.apply_points([[0, 0, 0], [9.0, 0, 0]])
    outside = frame.apply_points([[11.0, 0, 0], [0, 0, -1.0]])
    c = PointCloud(np.vstack([inside, outside]))
    out, _ = crop_box(c, ExclusionBox(frame, [-10, -10, 0], [10, 10, 5]))
    np.testing.assert_allclose(out.points, inside)


def test_exclusion_box_rejects_inverted_corners():
    with pytest.raises(InvalidParameter):
        ExclusionBox(RigidTransform.identity(), [0, 0, 1], [1, 1, 0])


def test_background_subtract_removes_the_reference(random_cloud, rng):
    reference = random_cloud(400)
    extra = rng.uniform(200.0, 260.0, (30, 3))
    scene = PointCloud(np.vstack([reference.points + 0.5, extra]))
    out, report = background_subtract(scene, reference, 1.0)
    np.testing.assert_array_equal(out.points, extra)
    assert report.parameters["reference_points"] == 400


def test_background_subtract_requires_one_frame(random_cloud):
    with pytest.raises(InvalidParameter):
        background_subtract(random_cloud(5), random_cloud(5).with_frame("scene"), 1.0)


def test_remove_near_planes_spares_the_exclusion_box():
    floor = flat_grid(10, 10, step=5.0, z=0.0)
    above = PointCloud([[10.0, 10.0, 20.0], [30.0, 30.0, 0.5]])
    c = PointCloud.concat([floor, above])
    plane = Plane([0, 0, 1.0], 0.0)
    out, _ = remove_near_planes(c, [plane], 1.0)
    np.testing.assert_allclose(out.points, [[10.0, 10.0, 20.0]])

    keep_corner = ExclusionBox(RigidTransform.identity(), [29, 29, -1], [31, 31, 1])
    spared, _ = remove_near_planes(c, [plane], 1.0, keep_corner)
    # (30, 30, 0) and (30, 30, 0.5) sit inside the box
    assert len(spared) == 3


def test_statistical_outlier_removal_drops_a_stray_point():
    grid = flat_grid(20, 20, step=1.0)
    c = PointCloud.concat([grid, PointCloud([[100.0, 100.0, 100.0]])])
    out, report = statistical_outlier_removal(c, k=8, stddev_mult=1.0)
    assert not np.any(np.all(out.points == [100.0, 100.0, 100.0], axis=1))
    assert report.removed >= 1
    with pytest.raises(TooFewPoints):
        statistical_outlier_removal(PointCloud(np.eye(3)), k=3)


def test_required_iterations():
    assert required_iterations(1.0) == 1
    assert required_iterations(0.0) == 2000
    assert required_iterations(0.5) == 52


def _floor_with_clutter(rng):
    floor = flat_grid(30, 20, step=2.0, z=0.0)
    clutter = rng.uniform([0, 0, 20], [60, 40, 60], (100, 3))
    return PointCloud(np.vstack([floor.points, clutter]))


def test_ransac_finds_the_floor(rng):
    c = _floor_with_clutter(rng)
    planes = fit_planes_ransac(c, dist_tol=0.5, min_inliers=200, max_planes=3, seed=1)
    assert len(planes) == 1
    np.testing.assert_allclose(planes[0].normal, [0, 0, 1], atol=1e-9)
    assert planes[0].offset == pytest.approx(0.0, abs=1e-9)
    assert planes[0].inlier_count == 600
    np.testing.assert_array_equal(planes[0].inliers, np.arange(600))


def test_plane_segmentation_is_seeded(rng):
    c = _floor_with_clutter(rng)
    first, planes, report = segment_and_remove_planes(c, 0.5, 200, 3, 1.0, seed=4)
    second, _, _ = segment_and_remove_planes(c, 0.5, 200, 3, 1.0, seed=4)
    np.testing.assert_array_equal(first.points, second.points)
    assert len(first) == 100
    assert report.name == "plane_subtraction"
    assert report.parameters["seed"] == 4


def _step_image(camera):
    values = np.full((camera.height, camera.width), 1000.0)
    values[50:55, 60:65] = 997.0
    return DepthImage(values, "depth", camera=camera)


def test_edge_mask_marks_both_sides_of_a_step(camera):
    mask = edge_mask(_step_image(camera), 2.5)
    # inner ring of the 5 x 5 raised square plus the 7 x 7 ring around it
    assert mask.sum() == 16 + 24
    assert mask[50, 60] and mask[54, 64] and mask[49, 59] and mask[55, 65]
    assert not mask[52, 62] and not mask[51, 61]
    assert not mask[48, 60] and not mask[52, 66]


def test_edge_mask_ignores_invalid_pixels(camera):
    img = _step_image(camera)
    values = img.values.copy()
    values[100, 100] = np.nan
    mask = edge_mask(DepthImage(values, "depth", camera=camera), 2.5)
    assert not mask[99:102, 99:102].any()


def test_depth_edges_back_project_with_viewing_direction(camera):
    edges = extract_depth_edges(_step_image(camera), 2.5)
    assert len(edges) == 40
    assert np.count_nonzero(np.isclose(edges.points[:, 2], 997.0)) == 16
    assert np.count_nonzero(np.isclose(edges.points[:, 2], 1000.0)) == 24
    np.testing.assert_allclose(np.linalg.norm(edges.normals, axis=1), 1.0)
    rays = edges.points / np.linalg.norm(edges.points, axis=1, keepdims=True)
    np.testing.assert_allclose(edges.normals, rays, atol=1e-12)


def test_depth_edges_refuse_intensity_images(camera):
    with pytest.raises(WrongImageKind):
        extract_depth_edges(DepthImage(np.zeros((4, 4)), "intensity", camera=camera))


def _random_frame(rng):
    return RigidTransform.from_rotvec(rng.normal(size=3) * 0.5, rng.uniform(-30.0, 30.0, 3))


def _source_rows(c, out):
    """Row of each kept point in the input; points are distinct so the lookup is exact."""
    rows = {tuple(p): i for i, p in enumerate(c.points)}
    return np.array([rows[tuple(p)] for p in out.points], dtype=int)


@pytest.mark.parametrize("seed", range(100))
def test_filters_agree_with_brute_force(seed):
    rng = np.random.default_rng(seed)
    c = PointCloud(rng.uniform(-100.0, 100.0, (int(rng.integers(1, 300)), 3)))

    frame = _random_frame(rng)
    z_min = rng.uniform(-80.0, 40.0)
    z_max = z_min + rng.uniform(1.0, 80.0)
    out, _ = z_band_filter(c, frame, z_min, z_max)
    local_z = [(frame.rotation.T @ (p - frame.translation))[2] for p in c.points]
    expected = [i for i, z in enumerate(local_z) if z_min <= z <= z_max]
    np.testing.assert_array_equal(_source_rows(c, out), expected)

    reference = PointCloud(rng.uniform(-100.0, 100.0, (int(rng.integers(1, 300)), 3)))
    radius = rng.uniform(5.0, 30.0)
    out, _ = background_subtract(c, reference, radius)
    gaps = np.linalg.norm(c.points[:, None, :] - reference.points[None, :, :], axis=2)
    expected = [i for i in range(len(c)) if not np.any(gaps[i] <= radius)]
    np.testing.assert_array_equal(_source_rows(c, out), expected)

    planes = [Plane.from_normal(rng.normal(size=3), rng.uniform(-50.0, 50.0))
              for _ in range(int(rng.integers(1, 4)))]
    dist = rng.uniform(1.0, 20.0)
    box = ExclusionBox(_random_frame(rng), [-40.0, -40.0, -40.0], rng.uniform(0.0, 60.0, 3))
    out, _ = remove_near_planes(c, planes, dist, box)
    expected = []
    for i, p in enumerate(c.points):
        near = min(abs(p @ plane.normal - plane.offset) for plane in planes) <= dist
        local = box.frame.rotation.T @ (p - box.frame.translation)
        inside = np.all(local >= box.min_corner) and np.all(local <= box.max_corner)
        if not near or inside:
            expected.append(i)
    np.testing.assert_array_equal(_source_rows(c, out), expected)


def test_filters_are_idempotent_subsets(random_cloud, rng):
    c = random_cloud(400, normals=True, intensities=True)
    box = ExclusionBox(_random_frame(rng), [-50.0, -50.0, -50.0], [40.0, 40.0, 40.0])
    reference = PointCloud(rng.uniform(-100.0, 100.0, (150, 3)))
    plane = Plane.from_normal([0.2, -0.3, 1.0], 5.0)
    filters = [
        lambda x: z_band_filter(x, box.frame, -20.0, 35.0),
        lambda x: intensity_filter(x, 0.2, 0.7),
        lambda x: normal_direction_filter(x, [0, 0, 1], 40.0),
        lambda x: normal_direction_filter(x, [1, 1, 0], 60.0, signed=True),
        lambda x: crop_box(x, box),
        lambda x: remove_near_planes(x, [plane], 15.0, box),
        lambda x: background_subtract(x, reference, 12.0),
    ]
    for apply_filter in filters:
        once, report = apply_filter(c)
        twice, again = apply_filter(once)
        rows = _source_rows(c, once)
        assert np.all(np.diff(rows) > 0)
        assert 0 < len(once) < len(c)
        np.testing.assert_array_equal(twice.points, once.points)
        np.testing.assert_array_equal(twice.normals, once.normals)
        np.testing.assert_array_equal(twice.intensities, once.intensities)
        assert again.removed == 0 and report.removed == len(c) - len(once)


def _floor_and_wall(rng, sigma=0.3):
    floor = np.column_stack([rng.uniform(10.0, 300.0, 600), rng.uniform(0.0, 200.0, 600),
                             rng.normal(0.0, sigma, 600)])
    wall = np.column_stack([rng.normal(0.0, sigma, 400), rng.uniform(0.0, 200.0, 400),
                            rng.uniform(10.0, 200.0, 400)])
    labels = np.r_[np.zeros(600, dtype=int), np.ones(400, dtype=int)]
    return PointCloud(np.vstack([floor, wall])), labels


def _check_floor_and_wall(seed):
    rng = np.random.default_rng(seed)
    c, truth = _floor_and_wall(rng)
    planes = fit_planes_ransac(c, dist_tol=1.0, min_inliers=200, max_planes=3, seed=seed)
    assert len(planes) == 2
    found = np.full(len(c), -1)
    for plane in planes:
        # floor normal is +z, wall normal is +-x
        found[plane.inliers] = 0 if abs(plane.normal[2]) > 0.99 else 1
        assert max(abs(plane.normal[0]), abs(plane.normal[2])) > 0.99
    assert np.mean(found == truth) >= 0.95


@pytest.mark.parametrize("seed", range(3))
def test_ransac_splits_floor_and_wall(seed):
    _check_floor_and_wall(seed)


@pytest.mark.slow
def test_ransac_splits_floor_and_wall_over_many_seeds():
    for seed in range(50):
        _check_floor_and_wall(seed)


def _empty_on_uniform_noise(seeds, n):
    empty = 0
    for seed in seeds:
        rng = np.random.default_rng(seed)
        c = PointCloud(rng.uniform(0.0, 100.0, (n, 3)))
        empty += not fit_planes_ransac(c, dist_tol=1.0, min_inliers=n // 2, max_planes=3, seed=seed)
    return empty


def test_ransac_finds_nothing_in_uniform_noise():
    assert _empty_on_uniform_noise(range(20), 200) == 20


@pytest.mark.slow
def test_ransac_finds_nothing_in_uniform_noise_over_many_seeds():
    assert _empty_on_uniform_noise(range(100), 2000) >= 99


def test_statistical_outlier_removal_strips_floating_ghosts():
    plane = flat_grid(40, 40, step=1.0)
    xs, ys = np.meshgrid(np.arange(5) * 8.0 + 4.0, np.arange(4) * 8.0 + 4.0)
    ghosts = np.column_stack([xs.ravel(), ys.ravel(), np.full(xs.size, 50.0)])
    c = PointCloud(np.vstack([plane.points, ghosts]))
    out, report = statistical_outlier_removal(c, k=8, stddev_mult=1.0)
    assert not np.any(out.points[:, 2] > 1.0)
    assert len(plane) - len(out) <= 0.01 * len(plane)
    assert report.removed >= 20
