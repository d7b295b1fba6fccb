import os

import pytest

import bench as bench_module
from bench import BenchRow, bench, format_table, read_bench_csv, write_bench_csv
from config import Bench
from errors import EmptyScene, InvalidParameter
from export_data import BenchExporter
from geom.transforms import RigidTransform
from match3d.results import MatchResult
from pipeline_runner import PipelineConfig
from report_manager import InputReport, PoseReport

DURATIONS = {"fast": {"s1.ply": 0.1, "s2.ply": 0.3}, "slow": {"s1.ply": 1.0, "s2.ply": 1.0}}
SCORES = {"s1.ply": 0.9, "s2.ply": 0.4}


def _fake_run(cfg, write=True, models=None, cache=None):
    (path,) = cfg.inputs
    if path == "bad.ply":
        raise EmptyScene("no points")
    duration = DURATIONS[cfg.name][path]
    result = MatchResult("plate", RigidTransform.identity(), SCORES[path], duration)
    return PoseReport([InputReport(path, [result], duration=duration)], duration, cfg.min_score)


@pytest.fixture
def fake_pipeline(monkeypatch):
    monkeypatch.setattr(bench_module, "run_pipeline", _fake_run)


def _cfg(name, inputs=("s1.ply", "s2.ply")):
    return PipelineConfig.from_dict({"name": name, "inputs": list(inputs), "stages": [{"stage": "voxel"}]},
                                    default_min_score=0.5)


def test_bench_statistics(fake_pipeline):
    fast, slow = bench([_cfg("fast"), _cfg("slow")], repetitions=2, models={})
    assert fast.n == slow.n == 4
    assert fast.duration_mean == pytest.approx(0.2)
    # sample standard deviation 0.1155 over sqrt(4)
    assert fast.duration_sem == pytest.approx(0.057735, abs=1e-6)
    assert slow.duration_sem == pytest.approx(0.0)
    assert fast.score_mean == pytest.approx(0.65)
    assert fast.objects == 2
    assert fast.per_object == pytest.approx(0.8 / 2)
    assert fast.fastest and not slow.fastest


def test_single_run_has_no_sem(fake_pipeline):
    (row,) = bench([_cfg("fast", ["s1.ply"])], models={})
    assert row.n == 1
    assert row.duration_sem is None and row.score_sem is None
    record = row.to_record()
    assert record[3] == Bench.SEM_ABSENT and record[5] == Bench.SEM_ABSENT


def test_failed_runs_count_with_score_zero(fake_pipeline):
    (row,) = bench([_cfg("fast")], inputs=["s1.ply", "bad.ply"], models={})
    assert row.n == 2 and row.failures == 1
    assert row.scores == [0.9, 0.0]


def test_bench_argument_checks(fake_pipeline):
    with pytest.raises(InvalidParameter):
        bench([_cfg("fast")], repetitions=0, models={})
    with pytest.raises(InvalidParameter):
        bench([], models={})
    with pytest.raises(InvalidParameter):
        bench([_cfg("fast")], labels=["a", "b"], models={})


def test_nothing_found_leaves_per_object_absent():
    row = BenchRow("empty", durations=[0.5, 0.7], scores=[0.0, 0.0])
    assert row.per_object is None
    assert row.to_record()[6] == Bench.SEM_ABSENT


def test_csv_table(tmp_path, fake_pipeline):
    rows = bench([_cfg("fast"), _cfg("slow")], models={})
    path = tmp_path / "out" / "bench.csv"
    write_bench_csv(rows, path)
    records = read_bench_csv(path)
    assert list(records[0]) == Bench.CSV_COLUMNS
    assert [r["config"] for r in records] == ["fast", "slow"]
    assert records[0]["n"] == "2"
    assert records[0]["fastest"] == "yes" and records[1]["fastest"] == ""
    assert float(records[1]["duration_mean_s"]) == pytest.approx(1.0)


def test_format_table_marks_the_fastest():
    rows = [BenchRow("a", [1.0], [0.5], fastest=True), BenchRow("b", [2.0, 2.2], [0.4, 0.6])]
    lines = format_table(rows).splitlines()
    assert lines[0].startswith("config")
    assert set(lines[1]) <= {"-", " "}
    assert lines[2].startswith("a") and lines[2].endswith("*")
    assert "2.100 ± 0.100" in lines[3]
    assert f"({Bench.SEM_ABSENT})" in lines[2]


def _rows():
    row = BenchRow("fast", [0.1, 0.3], [0.9, 0.4], objects=1, fastest=True)
    return [row, BenchRow("slow", [1.0], [0.8], objects=1)]


def test_csv_export_always_runs(tmp_path):
    written = BenchExporter(_rows(), "demo", str(tmp_path)).export(["svg"])
    assert written == [os.path.join(str(tmp_path), "bench_demo.csv")]


def test_excel_export(tmp_path):
    pytest.importorskip("xlsxwriter")
    exporter = BenchExporter(_rows(), "demo", str(tmp_path))
    assert exporter.export_to_excel()
    assert (tmp_path / "bench_demo.xlsx").stat().st_size > 0


def test_pdf_export(tmp_path):
    pytest.importorskip("fpdf")
    exporter = BenchExporter(_rows(), "demo", str(tmp_path))
    assert exporter.export_to_pdf()
    assert (tmp_path / "bench_demo.pdf").read_bytes().startswith(b"%PDF")
