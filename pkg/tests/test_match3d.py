import numpy as np
import pytest

from errors import (DegeneratePolygon, EmptyScene, InvalidParameter, MissingChannel,
                    ModelCacheVersionError, NoCorrespondences, SheetLocError)
from geom.cloud import PointCloud, apply
from geom.transforms import RigidTransform, pose_error
from match3d import (MatchParams, MatchResult, WorkpieceModel, build_ppf_model, build_ppf_model_for,
                     cluster_poses, edge_supported_match, flip_transform, icp_refine, icp_refine_detailed,
                     load_model_registry, load_ppf_model, match_models, reference_votes,
                     sample_model, save_model_registry, save_ppf_model, score_pose, sort_results,
                     surface_based_match, truncate_model)
from match3d.ppf import aligning_rotations, alpha_angles, pair_features, quantize, vote_bins

POSE = RigidTransform.from_euler_deg("xyz", [20.0, -10.0, 35.0], [30.0, -20.0, 800.0])


def _ppf(model, step):
    cloud = model.with_step(step).sampled_cloud
    return cloud, build_ppf_model(cloud, 0.05 * model.diameter, 12.0, model.id)


def test_outline_validation():
    with pytest.raises(DegeneratePolygon):
        WorkpieceModel("line", [(0, 0), (10, 0), (20, 0)], 3.0)
    with pytest.raises(DegeneratePolygon):
        WorkpieceModel("bowtie", [(0, 0), (10, 10), (10, 0), (0, 10)], 3.0)
    with pytest.raises(InvalidParameter):
        WorkpieceModel("flat", [(0, 0), (10, 0), (0, 10)], 0.0)


def test_clockwise_outline_is_reoriented(models):
    cw = WorkpieceModel("cw", [(0, 0), (0, 70), (120, 70), (120, 0)], 3.0)
    assert cw.area == pytest.approx(120 * 70)
    np.testing.assert_allclose(cw.centroid, [60.0, 35.0])
    assert models["plate"].diameter == pytest.approx(np.sqrt(120 ** 2 + 70 ** 2 + 3 ** 2))


def test_sampled_surface_has_outward_unit_normals(models):
    cloud = models["plate"].sampled_cloud
    assert cloud.frame_id == "model"
    np.testing.assert_allclose(np.linalg.norm(cloud.normals, axis=1), 1.0)
    top = cloud.points[:, 2] == 3.0
    assert np.all(cloud.normals[top, 2] == 1.0)
    assert np.all(models["plate"].contains_xy(cloud.points[:, :2] * 0.999 + 0.03))


def test_truncation_keeps_the_model_frame(models):
    half = truncate_model(models["plate"], (0, 0), (60, 70))
    assert half.area == pytest.approx(60 * 70)
    assert half.id == "plate_truncated"
    assert half.outline[:, 0].max() == pytest.approx(60.0)
    with pytest.raises(DegeneratePolygon):
        truncate_model(models["plate"], (200, 0), (300, 70))


def test_registry_round_trip_and_tamper_check(tmp_path, models):
    path = tmp_path / "models.json"
    save_model_registry(models.values(), path)
    back = load_model_registry(path)
    assert sorted(back) == sorted(models)
    np.testing.assert_allclose(back["u_channel"].outline, models["u_channel"].outline)

    path.write_text(path.read_text().replace('"thickness": 3.0', '"thickness": 4.0', 1))
    with pytest.raises(SheetLocError):
        load_model_registry(path)


def test_registry_rejects_duplicate_ids(tmp_path, models):
    path = tmp_path / "models.json"
    save_model_registry([models["plate"], models["plate"]], path)
    with pytest.raises(InvalidParameter):
        load_model_registry(path)


def test_votes_equal_a_brute_force_pair_scan(models):
    cloud, model = _ppf(models["plate"], 30.0)
    scene = apply(POSE, cloud, "camera")
    step = model.angle_step_rad
    n_model, n_bins = len(cloud), model.n_vote_bins

    i_idx, j_idx = np.nonzero(~np.eye(n_model, dtype=bool))
    m_feat = pair_features(cloud.points[i_idx], cloud.normals[i_idx], cloud.points[j_idx], cloud.normals[j_idx])
    m_keys = quantize(*m_feat, model.dist_step, step)
    rotations = aligning_rotations(cloud.normals)
    m_alpha = np.array([alpha_angles(rotations[i], cloud.points[i], cloud.points[j])
                        for i, j in zip(i_idx, j_idx)])

    for ref in (0, 7, len(scene) - 1):
        expected = np.zeros((n_model, n_bins), dtype=np.int64)
        others = np.array([s for s in range(len(scene)) if s != ref])
        feat = pair_features(scene.points[ref], scene.normals[ref], scene.points[others], scene.normals[others])
        usable = (feat[0] > 0) & (feat[0] <= model.diameter)
        s_keys = quantize(*feat, model.dist_step, step)
        s_rot = aligning_rotations(scene.normals[ref:ref + 1])[0]
        s_alpha = alpha_angles(s_rot, scene.points[ref], scene.points[others])
        for k in np.flatnonzero(usable):
            hits = np.flatnonzero(m_keys == s_keys[k])
            if len(hits) == 0:
                continue
            bins, _ = vote_bins(m_alpha[hits], np.full(len(hits), s_alpha[k]), step, n_bins)
            np.add.at(expected, (i_idx[hits], bins), 1)
        votes, _ = reference_votes(model, scene.points, scene.normals, ref)
        np.testing.assert_array_equal(votes, expected)


def test_hash_table_is_sorted_and_complete(models):
    cloud, model = _ppf(models["trapezoid"], 25.0)
    n = len(cloud)
    assert model.pair_count == n * (n - 1)
    assert np.all(np.diff(model.keys) >= 0)
    first, alphas = model.entries(model.keys[0])
    assert len(first) == len(alphas) >= 1


def test_surface_match_recovers_a_known_pose(models):
    cloud, model = _ppf(models["l_bracket"], 10.0)
    scene = apply(POSE, cloud, "camera")
    results = surface_based_match(scene, model, MatchParams(ref_sampling=2))
    best = results[0]
    dt, dr = pose_error(best.pose, POSE)
    assert best.score >= 0.95
    assert dt < 2.0 and dr < 2.0
    assert best.model_id == "l_bracket"
    assert [r.score for r in results] == sorted((r.score for r in results), reverse=True)


def test_surface_match_needs_points_and_normals(models):
    _, model = _ppf(models["plate"], 30.0)
    with pytest.raises(EmptyScene):
        surface_based_match(PointCloud.empty(with_normals=True), model)
    with pytest.raises(MissingChannel):
        surface_based_match(PointCloud(np.eye(3)), model)


def test_match_models_names_the_part(models):
    scene_cloud, _ = _ppf(models["l_bracket"], 10.0)
    scene = apply(POSE, scene_cloud, "camera")
    ppf = {mid: _ppf(models[mid], 10.0)[1] for mid in ("l_bracket", "plate")}
    results = match_models(scene, ppf, MatchParams(ref_sampling=3))
    assert results[0].model_id == "l_bracket"


def test_score_counts_only_visible_model_points(models):
    model = models["plate"]
    top = model.sampled_cloud.select(model.sampled_cloud.normals[:, 2] > 0.5)
    full = score_pose(top, model.sampled_cloud, RigidTransform.identity(), 1.0)
    seen = score_pose(top, model.sampled_cloud, RigidTransform.identity(), 1.0, viewpoint=(60.0, 35.0, 1000.0))
    assert full < 0.6
    assert seen == pytest.approx(1.0)


def test_cluster_poses_groups_nearby_candidates():
    a = RigidTransform.identity()
    b = RigidTransform.from_axis_angle([0, 0, 1], 3.0, [1.0, 0.0, 0.0])
    c = RigidTransform.from_translation([100.0, 0.0, 0.0])
    clusters = cluster_poses([(c, 4), (b, 5), (a, 6)], trans_tol=5.0, rot_tol=10.0)
    assert [cl.votes for cl in clusters] == [11, 4]
    assert clusters[0].pose is a
    assert clusters[0].members == 2


def test_clusters_rank_by_summed_not_best_votes():
    lone = RigidTransform.from_translation([100.0, 0.0, 0.0])
    a = RigidTransform.identity()
    b = RigidTransform.from_translation([1.0, 0.0, 0.0])
    clusters = cluster_poses([(lone, 6), (a, 5), (b, 4)], trans_tol=5.0, rot_tol=10.0)
    assert [(cl.votes, cl.best_votes) for cl in clusters] == [(9, 5), (6, 6)]
    assert clusters[0].pose is a and clusters[1].pose is lone


def test_flip_is_a_half_turn_about_the_centre(models):
    _, model = _ppf(models["plate"], 30.0)
    flip = flip_transform(model)
    assert flip.compose(flip).almost_equal(RigidTransform.identity(), trans_tol=1e-9)
    np.testing.assert_allclose(flip.apply_points([model.flip_pivot]), [model.flip_pivot], atol=1e-9)
    assert flip.rotation_angle_deg() == pytest.approx(180.0)


def test_match_params_validation():
    with pytest.raises(InvalidParameter):
        MatchParams(edge_weight=1.5)
    with pytest.raises(InvalidParameter):
        MatchParams.from_dict({"ref_sampling": 2, "bogus": 1})
    assert MatchParams.from_dict({"ref_sampling": 2}).ref_sampling == 2


def test_results_sort_by_score_and_validate():
    results = [MatchResult("a", RigidTransform.identity(), 0.4), MatchResult("b", RigidTransform.identity(), 0.9),
               MatchResult("c", RigidTransform.identity(), 0.4)]
    assert [r.model_id for r in sort_results(results)] == ["b", "a", "c"]
    with pytest.raises(InvalidParameter):
        MatchResult("a", RigidTransform.identity(), 1.2)


def test_icp_converges_from_a_small_offset(models):
    cloud = models["l_bracket"].with_step(4.0).sampled_cloud
    scene = apply(POSE, cloud, "camera")
    start = POSE.compose(RigidTransform.from_axis_angle([1, 1, 0], 0.5, [0.8, -0.6, 0.3]))
    result = icp_refine_detailed(scene, cloud, start)
    assert all(b <= a for a, b in zip(result.history, result.history[1:]))
    dt, dr = pose_error(result.pose, POSE)
    assert dt < 0.1 and dr < 0.1
    pose, rms = icp_refine(scene, cloud, start)
    assert rms == pytest.approx(result.rms)


def test_icp_without_overlap_raises(models):
    cloud = models["plate"].sampled_cloud
    far = RigidTransform.from_translation([0.0, 0.0, 5000.0])
    with pytest.raises(NoCorrespondences):
        icp_refine(apply(far, cloud), cloud, RigidTransform.identity())


def test_ppf_cache_round_trip_and_version(tmp_path, models):
    model = build_ppf_model_for(models["trapezoid"], step=25.0)
    path = tmp_path / "trapezoid.npz"
    save_ppf_model(model, path)
    back = load_ppf_model(path)
    np.testing.assert_array_equal(back.keys, model.keys)
    assert back.model_id == "trapezoid"
    assert back.diameter == model.diameter

    stale = tmp_path / "stale.npz"
    np.savez(stale, version=np.int64(999), model_id=np.array("x"))
    with pytest.raises(ModelCacheVersionError):
        load_ppf_model(stale)


def test_sample_model_covers_the_extruded_outline(models):
    plate = models["plate"]
    fine, coarse = sample_model(plate, 5.0), sample_model(plate, 15.0)
    assert len(fine) > len(coarse) > 0
    assert fine.frame_id == "model" and fine.has_normals
    assert fine.points[:, 2].min() == 0.0 and fine.points[:, 2].max() == plate.thickness
    lo, hi = plate.outline.min(axis=0), plate.outline.max(axis=0)
    assert np.all(fine.points[:, :2] >= lo - 1e-9) and np.all(fine.points[:, :2] <= hi + 1e-9)
    with pytest.raises(InvalidParameter):
        sample_model(plate, 0.0)


def test_edge_supported_match_scores_rims(models):
    bracket = models["l_bracket"].with_step(10.0)
    cloud, model = _ppf(models["l_bracket"], 10.0)
    scene = apply(POSE, cloud, "camera")
    edges = apply(POSE, bracket.edge_cloud, "camera")
    params = MatchParams(ref_sampling=2)
    best = edge_supported_match(scene, edges, model, bracket.edge_cloud, params)[0]
    dt, dr = pose_error(best.pose, POSE)
    assert dt < 2.0 and dr < 2.0
    assert best.edge_score >= 0.95 and best.score >= 0.95


def test_edge_supported_match_without_edges_is_surface_matching(models):
    bracket = models["l_bracket"].with_step(10.0)
    cloud, model = _ppf(models["l_bracket"], 10.0)
    scene = apply(POSE, cloud, "camera")
    params = MatchParams(ref_sampling=2)
    plain = surface_based_match(scene, model, params)
    blended = edge_supported_match(scene, PointCloud.empty(), model, bracket.edge_cloud, params)
    assert [r.score for r in blended] == [r.score for r in plain]
    assert all(r.edge_score is None for r in blended)


@pytest.mark.parametrize("model_id", ["plate", "l_bracket", "t_plate", "trapezoid", "u_channel"])
def test_every_builtin_model_matches_itself(models, model_id):
    cloud, model = _ppf(models[model_id], 10.0)
    scene = apply(POSE, cloud, "camera")
    best = surface_based_match(scene, model, MatchParams(ref_sampling=2))[0]
    assert best.model_id == model_id
    assert best.score >= 0.95
    assert score_pose(scene, cloud, best.pose, 2.0 * model.dist_step) >= 0.95


@pytest.mark.slow
def test_builtin_models_match_themselves_in_many_poses(models, rng):
    for model_id in sorted(models):
        cloud, model = _ppf(models[model_id], 6.0)
        for _ in range(5):
            pose = RigidTransform.from_rotvec(rng.normal(size=3), rng.uniform(-300.0, 300.0, 3))
            best = surface_based_match(apply(pose, cloud, "camera"), model, MatchParams(ref_sampling=2))[0]
            assert best.score >= 0.95, model_id


def test_raw_cloud_scores_a_floor_pose_like_the_part(pallet_render, models):
    spec, _, cloud, gt = pallet_render
    plate = models["plate"]
    truth = gt.parts[0].cam_pose
    centre = spec.parts[0].pose.apply_points([[*plate.centroid, 0.0]])[0]
    # slide the part onto bare floor and sink its top face into the floor plane
    shift = RigidTransform.from_translation([-150.0 if centre[0] > 0 else 150.0, 0.0, -plate.thickness])
    wrong = spec.cam_H_scene.compose(shift).compose(spec.cam_pose).compose(truth)

    right_score = score_pose(cloud, plate.sampled_cloud, truth, 2.0, viewpoint=(0.0, 0.0, 0.0))
    wrong_score = score_pose(cloud, plate.sampled_cloud, wrong, 2.0, viewpoint=(0.0, 0.0, 0.0))
    assert pose_error(wrong, truth)[0] > 100.0
    assert right_score > 0.9
    assert wrong_score >= 0.8 * right_score
