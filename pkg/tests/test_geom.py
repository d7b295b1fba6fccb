import numpy as np
import pytest

from conftest import flat_grid
from errors import InvalidParameter, InvalidTransform, MissingCoordinateProperty, ParseError, TooFewPoints
from geom.camera import CameraModel
from geom.cloud import PointCloud, apply
from geom.depth_image import DepthImage, project_to_depth_image
from geom.image_io import read_depth_image, write_depth_image
from geom.neighbors import NeighborIndex, squared_distances
from geom.normals import estimate_normals
from geom.ply_io import read_ply, write_ply
from geom.sampling import voxel_downsample
from geom.transforms import RigidTransform, compose, kabsch, pose_error, rotation_between


def test_compose_applies_right_operand_first():
    a = RigidTransform.from_axis_angle([0, 0, 1], 90.0, [1.0, 0.0, 0.0])
    b = RigidTransform.from_translation([0.0, 1.0, 0.0])
    np.testing.assert_allclose(compose(a, b).apply_points([[0.0, 0.0, 0.0]]), [[0.0, 0.0, 0.0]], atol=1e-12)
    np.testing.assert_allclose(compose(b, a).apply_points([[0.0, 0.0, 0.0]]), [[1.0, 1.0, 0.0]], atol=1e-12)


def test_inverse_undoes_transform(rng):
    t = RigidTransform.from_rotvec(rng.normal(size=3), rng.uniform(-100, 100, 3))
    assert t.compose(t.inverse()).almost_equal(RigidTransform.identity())
    points = rng.uniform(-50, 50, (10, 3))
    np.testing.assert_allclose(t.inverse().apply_points(t.apply_points(points)), points, atol=1e-9)


def test_non_orthonormal_rotation_is_rejected():
    with pytest.raises(InvalidTransform):
        RigidTransform(np.diag([1.0, 1.0, 1.01]), np.zeros(3))
    with pytest.raises(InvalidTransform):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_matrix_list_form_keeps_the_pose(rng):
    t = RigidTransform.from_euler_deg("xyz", [10.0, -25.0, 140.0], [5.0, 6.0, 7.0])
    assert RigidTransform.from_list(t.to_list()).almost_equal(t)
    assert np.allclose(t.as_matrix()[3], [0, 0, 0, 1])


def test_orthonormalized_removes_accumulated_drift():
    step = RigidTransform.from_axis_angle([1, 1, 0], 0.7, [0.1, 0.0, 0.0])
    t = RigidTransform.identity()
    for _ in range(500):
        t = t.compose(step)
    clean = t.orthonormalized()
    np.testing.assert_allclose(clean.rotation @ clean.rotation.T, np.eye(3), atol=1e-12)
    assert clean.chain == 0 and clean.almost_equal(t)


def test_pose_error_reports_mm_and_degrees():
    moved = RigidTransform.from_axis_angle([0, 0, 1], 30.0, [3.0, 4.0, 0.0])
    dt, dr = pose_error(RigidTransform.identity(), moved)
    assert dt == pytest.approx(5.0)
    assert dr == pytest.approx(30.0)


def test_kabsch_recovers_a_rigid_motion(rng):
    truth = RigidTransform.from_rotvec(rng.normal(size=3), rng.uniform(-200, 200, 3))
    source = rng.uniform(-60, 60, (12, 3))
    found = kabsch(source, truth.apply_points(source))
    assert found.almost_equal(truth, trans_tol=1e-8, rot_tol_deg=1e-6)


def test_kabsch_needs_three_pairs():
    with pytest.raises(InvalidTransform):
        kabsch(np.zeros((2, 3)), np.zeros((2, 3)))


@pytest.mark.parametrize("u,v", [([0, 0, 1], [0, 0, -1]), ([1, 0, 0], [0, 1, 0]), ([0, 0, 1], [0, 0, 1])])
def test_rotation_between_maps_u_onto_v(u, v):
    rotation = rotation_between(u, v)
    np.testing.assert_allclose(rotation @ np.asarray(u, float), v, atol=1e-12)
    assert np.linalg.det(rotation) == pytest.approx(1.0)


def test_point_cloud_validates_channels():
    with pytest.raises(InvalidParameter):
        PointCloud(np.zeros((2, 3)), normals=np.array([[0, 0, 2.0], [0, 0, 1.0]]))
    with pytest.raises(InvalidParameter):
        PointCloud(np.zeros((2, 3)), intensities=np.zeros(3))
    with pytest.raises(InvalidParameter):
        PointCloud(np.array([[0.0, np.nan, 0.0]]))


def test_select_preserves_order_and_channels(random_cloud):
    c = random_cloud(20, normals=True, intensities=True)
    sub = c.select([5, 2, 9])
    np.testing.assert_array_equal(sub.points, c.points[[5, 2, 9]])
    np.testing.assert_array_equal(sub.intensities, c.intensities[[5, 2, 9]])
    assert sub.has_normals and sub.frame_id == c.frame_id


def test_apply_moves_points_and_rotates_normals():
    c = PointCloud([[1.0, 0.0, 0.0]], normals=[[1.0, 0.0, 0.0]])
    moved = apply(RigidTransform.from_axis_angle([0, 0, 1], 90.0, [0, 0, 5.0]), c, "scene")
    np.testing.assert_allclose(moved.points, [[0.0, 1.0, 5.0]], atol=1e-12)
    np.testing.assert_allclose(moved.normals, [[0.0, 1.0, 0.0]], atol=1e-12)
    assert moved.frame_id == "scene"


def test_knn_matches_brute_force(random_cloud, rng):
    c = random_cloud(300)
    index = NeighborIndex(c)
    queries = rng.uniform(-100, 100, (25, 3))
    idx, dist = index.knn_batch(queries, 6)
    for row, q in enumerate(queries):
        d2 = squared_distances(c.points, q)
        expected = np.lexsort((np.arange(len(c)), d2))[:6]
        np.testing.assert_array_equal(idx[row], expected)
        np.testing.assert_allclose(dist[row], np.sqrt(d2[expected]))


def test_knn_breaks_ties_by_index():
    points = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [5, 5, 5]]
    idx, _ = NeighborIndex(points).knn([0, 0, 0], 3)
    np.testing.assert_array_equal(idx, [0, 1, 2])


def test_radius_is_inclusive():
    index = NeighborIndex([[0, 0, 0], [1, 0, 0], [2, 0, 0]])
    np.testing.assert_array_equal(index.radius([0, 0, 0], 1.0), [0, 1])
    np.testing.assert_array_equal(index.has_neighbor_within([[3.0, 0, 0], [3.5, 0, 0]], 1.0), [True, False])


def test_empty_index_refuses_knn():
    with pytest.raises(InvalidParameter):
        NeighborIndex(np.zeros((0, 3))).knn([0, 0, 0], 1)


def test_normals_of_a_plane_face_the_viewpoint():
    c = estimate_normals(flat_grid(z=500.0), k=8, viewpoint=(0.0, 0.0, 0.0))
    np.testing.assert_allclose(c.normals, np.tile([0.0, 0.0, -1.0], (len(c), 1)), atol=1e-9)
    flipped = estimate_normals(flat_grid(z=500.0), k=8, viewpoint=(0.0, 0.0, 1000.0))
    assert np.all(flipped.normals[:, 2] > 0.999)


def test_normals_need_enough_points():
    with pytest.raises(TooFewPoints):
        estimate_normals(PointCloud(np.eye(3)), k=5)


def test_voxel_downsample_keeps_one_centroid_per_cell():
    c = flat_grid(30, 20, step=2.0)
    down = voxel_downsample(c, 4.0)
    assert len(down) == 15 * 10
    # each 4 mm cell holds the 2 x 2 block at offsets 0 and 2
    assert np.allclose(np.sort(np.unique(down.points[:, 0]))[:2], [1.0, 5.0])


def test_ply_keeps_every_channel(tmp_path, random_cloud):
    c = random_cloud(40, normals=True, intensities=True).with_frame("scene")
    path = tmp_path / "cloud.ply"
    write_ply(c, path)
    back = read_ply(path)
    np.testing.assert_array_equal(back.points, c.points)
    np.testing.assert_allclose(back.normals, c.normals, atol=1e-15)
    np.testing.assert_array_equal(back.intensities, c.intensities)
    assert back.frame_id == "scene"


def test_ply_without_z_is_rejected(tmp_path):
    path = tmp_path / "bad.ply"
    path.write_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                    "end_header\n1 2\n")
    with pytest.raises(MissingCoordinateProperty):
        read_ply(path)


def test_ply_parse_error_names_the_line(tmp_path):
    path = tmp_path / "bad.ply"
    path.write_text("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                    "property float z\nend_header\n1 2 3\n1 oops 3\n")
    with pytest.raises(ParseError) as info:
        read_ply(path)
    assert info.value.line_number == 9


def test_depth_pgm_error_within_half_a_quantisation_step(tmp_path, camera, rng):
    values = rng.uniform(700.0, 900.0, (camera.height, camera.width))
    values[10:20, 30:40] = np.nan
    img = DepthImage(values, "depth", camera=camera, cam_pose=RigidTransform.from_translation([0, 0, 800.0]))
    path = tmp_path / "depth.pgm"
    write_depth_image(img, path)
    back = read_depth_image(path)

    scale = (np.nanmax(values) - np.nanmin(values)) / 65534
    np.testing.assert_array_equal(back.mask, img.mask)
    assert np.nanmax(np.abs(back.values - values)) <= scale / 2 + 1e-9
    assert back.camera == camera
    assert back.cam_pose.almost_equal(img.cam_pose)


def test_camera_back_projection_inverts_projection(camera):
    u, v = np.array([0.5, 100.25, 255.5]), np.array([0.5, 50.75, 191.5])
    points = camera.back_project(u, v, np.array([500.0, 800.0, 1200.0]))
    pu, pv, z = camera.project(points)
    np.testing.assert_allclose(pu, u)
    np.testing.assert_allclose(pv, v)
    np.testing.assert_allclose(z, [500.0, 800.0, 1200.0])


def test_camera_rejects_bad_range():
    with pytest.raises(InvalidParameter):
        CameraModel.centered(400.0, 64, 48, (500.0, 300.0))


def test_orthographic_projection_keeps_nearest_point():
    c = PointCloud([[0.2, 0.2, 5.0], [0.4, 0.3, 2.0], [1.5, 0.2, 7.0]])
    img = project_to_depth_image(c, [0.0, 0.0, 1.0], 1.0)
    assert img.values.shape == (1, 2)
    np.testing.assert_allclose(img.values[0], [2.0, 7.0])
