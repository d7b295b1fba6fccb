"""Per-run filter bookkeeping."""

import time
from dataclasses import dataclass, field
from typing import Any, Dict

from error_logger import log_filter_report
from geom.cloud import PointCloud


@dataclass(frozen=True)
class FilterReport:
    """Counts, wall time and echoed parameters of one filter run."""

    name: str
    points_in: int
    points_out: int
    duration: float
    parameters: Dict[str, Any] = field(default_factory=dict)

    @property
    def removed(self):
        return self.points_in - self.points_out

    def to_dict(self):
        return {
            "name": self.name,
            "points_in": self.points_in,
            "points_out": self.points_out,
            "duration": self.duration,
            "parameters": dict(self.parameters),
        }

    @staticmethod
    def from_dict(data):
        return FilterReport(data["name"], int(data["points_in"]), int(data["points_out"]),
                            float(data["duration"]), dict(data.get("parameters", {})))


def finish(name, cloud: PointCloud, keep, started, **parameters):
    """Apply the keep mask, stamp the duration and log the report."""
    out = cloud.select(keep)
    report = FilterReport(name, len(cloud), len(out), time.perf_counter() - started, parameters)
    log_filter_report(report)
    return out, report
