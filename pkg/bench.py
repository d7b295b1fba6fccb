"""Benchmark harness: run pipeline configs repeatedly and report mean +/- SEM of time and score."""

import csv
import os
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

import config
from error_logger import log_error, log_info, log_warning
from errors import InvalidParameter, SheetLocError
from match3d.registry import builtin_models, load_model_registry
from pipeline_runner import PipelineConfig, run_pipeline


@dataclass
class BenchRow:
    """Statistics of one config over n runs (inputs x repetitions)."""

    config: str
    durations: List[float] = field(default_factory=list)
    scores: List[float] = field(default_factory=list)
    objects: int = 0
    failures: int = 0
    fastest: bool = False

    @property
    def n(self):
        return len(self.durations)

    @property
    def duration_mean(self):
        return float(np.mean(self.durations)) if self.durations else 0.0

    @property
    def score_mean(self):
        return float(np.mean(self.scores)) if self.scores else 0.0

    @property
    def duration_sem(self) -> Optional[float]:
        return _sem(self.durations)

    @property
    def score_sem(self) -> Optional[float]:
        return _sem(self.scores)

    @property
    def per_object(self) -> Optional[float]:
        """Total time divided by objects found; None when nothing was found."""
        return float(np.sum(self.durations)) / self.objects if self.objects else None

    def to_record(self):
        """CSV record in Bench.CSV_COLUMNS order; absent values use the SEM_ABSENT marker."""
        return [self.config, self.n, _fmt(self.duration_mean), _fmt(self.duration_sem),
                _fmt(self.score_mean), _fmt(self.score_sem), _fmt(self.per_object),
                "yes" if self.fastest else ""]


def _sem(values) -> Optional[float]:
    if len(values) < 2:
        return None
    return float(stats.sem(np.asarray(values, dtype=float), ddof=1))


def _fmt(value, digits=6):
    if value is None:
        return config.Bench.SEM_ABSENT
    return f"{value:.{digits}f}"


def _mean_sem(mean, sem, unit=""):
    if sem is None:
        return f"{mean:.3f}{unit} ({config.Bench.SEM_ABSENT})"
    return f"{mean:.3f} ± {sem:.3f}{unit}"


def bench(configs: Sequence[PipelineConfig], repetitions=1, labels: Optional[Sequence[str]] = None,
          inputs: Optional[Sequence[str]] = None, models=None) -> List[BenchRow]:
    """Run each config on each of its inputs `repetitions` times.

    `inputs` replaces every config's own inputs so configs can be compared on the same
    scenes. The row with the lowest mean duration is flagged fastest. A failing run counts
    with score 0 and its elapsed time.
    """
    if repetitions < 1:
        raise InvalidParameter("repetitions must be >= 1")
    if not configs:
        raise InvalidParameter("bench needs at least one config")
    labels = list(labels) if labels else [c.name or f"config_{k + 1}" for k, c in enumerate(configs)]
    if len(labels) != len(configs):
        raise InvalidParameter("one label per config")

    rows = []
    for label, cfg in zip(labels, configs):
        registry = models
        if registry is None:
            registry = load_model_registry(cfg.models) if cfg.models else builtin_models()
        cache = {}
        row = BenchRow(label)
        paths = list(inputs) if inputs else list(cfg.inputs)
        for _ in range(repetitions):
            for path in paths:
                started = time.perf_counter()
                try:
                    report = run_pipeline(cfg.with_inputs([path]), write=False, models=registry, cache=cache)
                except SheetLocError as e:
                    log_warning(f"Bench run of '{label}' on {path} failed: {e}")
                    row.durations.append(time.perf_counter() - started)
                    row.scores.append(0.0)
                    row.failures += 1
                    continue
                entry = report.inputs[0]
                best = entry.best()
                row.durations.append(entry.duration)
                row.scores.append(best.score if best is not None else 0.0)
                row.objects += len(report.matches())
        rows.append(row)
        log_info(f"Bench '{label}': n={row.n}, {_mean_sem(row.duration_mean, row.duration_sem, ' s')}, "
                 f"score {_mean_sem(row.score_mean, row.score_sem)}")

    fastest = min(rows, key=lambda r: r.duration_mean)
    fastest.fastest = True
    return rows


def write_bench_csv(rows: Sequence[BenchRow], path):
    """Machine-readable table with Bench.CSV_COLUMNS as header."""
    try:
        folder = os.path.dirname(os.path.abspath(str(path)))
        os.makedirs(folder, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(config.Bench.CSV_COLUMNS)
            for row in rows:
                writer.writerow(row.to_record())
    except OSError as e:
        log_error(f"Failed to write bench table {path}", e)
        raise
    log_info(config.Messages.BENCH_SAVED.format(path=path))


def read_bench_csv(path):
    """Rows of a bench CSV as dicts keyed by column name."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def format_table(rows: Sequence[BenchRow]) -> str:
    """Human-readable table: mean ± SEM per config, n, per-object time and the fastest flag."""
    header = ["config", "n", "duration [s]", "score", "per object [s]", "fastest"]
    body = [[row.config, str(row.n), _mean_sem(row.duration_mean, row.duration_sem),
             _mean_sem(row.score_mean, row.score_sem),
             config.Bench.SEM_ABSENT if row.per_object is None else f"{row.per_object:.3f}",
             "*" if row.fastest else ""] for row in rows]
    widths = [max(len(line[k]) for line in [header] + body) for k in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
