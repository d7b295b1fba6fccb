import json

import pytest

from geom.cloud import PointCloud
from geom.ply_io import read_ply, write_ply
import main as main_module
from main import main
from report_manager import load_report

SHAPE_STAGES = [
    {"stage": "contrast_image", "params": {"mm_per_px": 2.5, "value_range": [0.0, 3.0]}},
    {"stage": "shape_match", "params": {"models": ["plate"], "theta_step": 2.0, "levels": 2}},
]


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    folder = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--count", "1", "--seed", "3", "--sigma", "0", "--dropout", "0",
                 "--ghost-rate", "0", "--out", str(folder)]) == 0
    return folder


def _write_config(path, inputs, stages):
    path.write_text(json.dumps({"inputs": [str(p) for p in inputs], "stages": stages, "min_score": 0.5}))
    return str(path)


def test_synth_writes_a_scene(scene_dir):
    for suffix in (".ply", ".pgm", ".json", "_scene.json", "_gt.json"):
        assert (scene_dir / f"scene_0003{suffix}").exists()


def test_synth_scan_report(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path), "--scan-report"]) == 0
    out = capsys.readouterr().out
    assert "plate in_range=True" in out


def test_pipeline_stages_lists_the_catalogue(capsys):
    assert main(["pipeline", "stages"]) == 0
    out = capsys.readouterr().out
    assert "surface_match:" in out and "shape_match:" in out


def test_pipeline_run_reports_a_match(tmp_path, scene_dir, capsys):
    cfg = _write_config(tmp_path / "shape.json", [scene_dir / "scene_0003.pgm"], SHAPE_STAGES)
    report_path = tmp_path / "report.json"
    assert main(["pipeline", "run", cfg, "--output", str(report_path)]) == 0
    assert "plate" in capsys.readouterr().out
    assert load_report(report_path).found


def test_pipeline_run_without_matches_exits_with_two(tmp_path, scene_dir):
    stages = [{"stage": "z_band", "params": {"z_min": 1.0, "z_max": 10.0}}]
    cfg = _write_config(tmp_path / "filter.json", [scene_dir / "scene_0003.pgm"], stages)
    assert main(["pipeline", "run", cfg]) == 2


def test_invalid_stage_exits_with_one(tmp_path, capsys):
    cfg = _write_config(tmp_path / "bad.json", [tmp_path / "x.ply"], [{"stage": "sharpen"}])
    assert main(["pipeline", "run", cfg]) == 1
    assert "sharpen" in capsys.readouterr().err


def test_empty_cloud_exits_with_one(tmp_path, capsys):
    empty = tmp_path / "empty.ply"
    write_ply(PointCloud.empty(), empty)
    cfg = _write_config(tmp_path / "cfg.json", [empty], [{"stage": "voxel"}])
    assert main(["pipeline", "run", cfg]) == 1
    assert "no points" in capsys.readouterr().err


def test_refine_writes_the_cleaned_cloud(tmp_path, scene_dir):
    out = tmp_path / "part.ply"
    assert main(["refine", str(scene_dir / "scene_0003.pgm"), str(out), "--z-band", "1", "10"]) == 0
    cloud = read_ply(out)
    full = read_ply(scene_dir / "scene_0003.ply")
    assert 0 < len(cloud) < len(full)


def test_refine_rejects_matching_stages(tmp_path, scene_dir):
    stages = tmp_path / "stages.json"
    stages.write_text(json.dumps([{"stage": "icp"}]))
    assert main(["refine", str(scene_dir / "scene_0003.pgm"), str(tmp_path / "o.ply"),
                 "--stages", str(stages)]) == 1


def test_unexpected_errors_are_logged_and_exit_with_one(monkeypatch, capsys):
    logged = []

    def broken(args):
        raise RuntimeError("boom")

    monkeypatch.setattr(main_module, "cmd_pipeline_stages", broken)
    monkeypatch.setattr(main_module, "log_error", lambda message, exception=None: logged.append(exception))
    assert main(["pipeline", "stages"]) == 1
    assert "error: unexpected RuntimeError: boom" in capsys.readouterr().err
    assert len(logged) == 1 and isinstance(logged[0], RuntimeError)
