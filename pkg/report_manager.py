"""Pose reports: per-input match results, filter reports and timings, saved as signed JSON.

Every saved report validates against POSE_REPORT_SCHEMA (jsonschema, draft 7).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import config
from error_logger import log_error, log_info
from errors import ParseError, SheetLocError
from integrity import read_document, sign_document, write_document
from match3d.results import MatchResult
from refine.report import FilterReport

try:
    import jsonschema
    JSONSCHEMA_AVAILABLE = True
except ImportError:
    JSONSCHEMA_AVAILABLE = False

DOCUMENT = "pose_report"
PAYLOAD = "inputs"

_NUMBER_OR_NULL = {"type": ["number", "null"]}
_MATRIX_ROW = {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}

POSE_REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "SheetLoc pose report",
    "type": "object",
    "required": ["app_signature", "schema_version", "document", "inputs", "total_duration",
                 "min_score", "seed", "data_integrity"],
    "properties": {
        "app_signature": {"const": config.App.SIGNATURE},
        "schema_version": {"const": config.App.SCHEMA_VERSION},
        "document": {"const": DOCUMENT},
        "name": {"type": ["string", "null"]},
        "seed": {"type": "integer", "minimum": 0},
        "min_score": {"type": "number", "minimum": 0, "maximum": 1},
        "total_duration": {"type": "number", "minimum": 0},
        "found": {"type": "boolean"},
        "inputs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["input", "results", "filters", "stages", "duration"],
                "properties": {
                    "input": {"type": "string"},
                    "duration": {"type": "number", "minimum": 0},
                    "points_in": {"type": "integer", "minimum": 0},
                    "results": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["model_id", "pose", "score", "duration"],
                            "properties": {
                                "model_id": {"type": "string"},
                                "pose": {"type": "array", "items": _MATRIX_ROW, "minItems": 4, "maxItems": 4},
                                "score": {"type": "number", "minimum": 0, "maximum": 1},
                                "duration": {"type": "number", "minimum": 0},
                                "surface_score": _NUMBER_OR_NULL,
                                "edge_score": _NUMBER_OR_NULL,
                                "votes": {"type": "integer", "minimum": 0},
                                "flipped": {"type": "boolean"},
                                "rms": _NUMBER_OR_NULL,
                            },
                        },
                    },
                    "filters": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["name", "points_in", "points_out", "duration"],
                            "properties": {
                                "name": {"type": "string"},
                                "points_in": {"type": "integer", "minimum": 0},
                                "points_out": {"type": "integer", "minimum": 0},
                                "duration": {"type": "number", "minimum": 0},
                                "parameters": {"type": "object"},
                            },
                        },
                    },
                    "stages": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["stage", "duration"],
                            "properties": {
                                "stage": {"type": "string"},
                                "duration": {"type": "number", "minimum": 0},
                                "points_out": {"type": "integer", "minimum": 0},
                            },
                        },
                    },
                },
            },
        },
        "data_integrity": {
            "type": "object",
            "required": ["algorithm", "checksum"],
            "properties": {"algorithm": {"type": "string"}, "checksum": {"type": "string"}},
        },
    },
}


@dataclass
class InputReport:
    """Results and bookkeeping for one pipeline input."""

    input: str
    results: List[MatchResult] = field(default_factory=list)
    filters: List[FilterReport] = field(default_factory=list)
    stages: List[Dict] = field(default_factory=list)
    duration: float = 0.0
    points_in: int = 0

    def best(self) -> Optional[MatchResult]:
        return self.results[0] if self.results else None

    def to_dict(self):
        return {
            "input": self.input,
            "points_in": int(self.points_in),
            "results": [r.to_dict() for r in self.results],
            "filters": [f.to_dict() for f in self.filters],
            "stages": [dict(s) for s in self.stages],
            "duration": float(self.duration),
        }

    @staticmethod
    def from_dict(data):
        return InputReport(data["input"], [MatchResult.from_dict(r) for r in data.get("results", [])],
                           [FilterReport.from_dict(f) for f in data.get("filters", [])],
                           [dict(s) for s in data.get("stages", [])], float(data.get("duration", 0.0)),
                           int(data.get("points_in", 0)))


@dataclass
class PoseReport:
    """Outcome of one pipeline run over all of its inputs."""

    inputs: List[InputReport]
    total_duration: float
    min_score: float = config.Pipeline.DEFAULT_MIN_SCORE
    seed: int = config.Ransac.SEED
    name: Optional[str] = None

    @property
    def found(self):
        """At least one match reaches min_score."""
        return any(r.score >= self.min_score for report in self.inputs for r in report.results)

    def exit_code(self):
        return config.Pipeline.EXIT_FOUND if self.found else config.Pipeline.EXIT_NONE

    def matches(self) -> List[MatchResult]:
        return [r for report in self.inputs for r in report.results if r.score >= self.min_score]

    def to_document(self):
        """Signed JSON document; the checksum covers the per-input payload."""
        return sign_document(DOCUMENT, PAYLOAD, [report.to_dict() for report in self.inputs],
                             name=self.name, seed=int(self.seed), min_score=float(self.min_score),
                             total_duration=float(self.total_duration), found=self.found)

    @staticmethod
    def from_document(document):
        return PoseReport([InputReport.from_dict(d) for d in document.get(PAYLOAD, [])],
                          float(document.get("total_duration", 0.0)),
                          float(document.get("min_score", config.Pipeline.DEFAULT_MIN_SCORE)),
                          int(document.get("seed", config.Ransac.SEED)), document.get("name"))

    def without_durations(self):
        """Plain dict with every duration removed, for comparing reruns."""
        data = {"name": self.name, "seed": self.seed, "min_score": self.min_score, "inputs": []}
        for report in self.inputs:
            entry = report.to_dict()
            entry.pop("duration")
            for item in entry["results"] + entry["filters"] + entry["stages"]:
                item.pop("duration", None)
            data["inputs"].append(entry)
        return data


def validate_report_document(document):
    """Raise SheetLocError when a report document violates the schema."""
    if not JSONSCHEMA_AVAILABLE:
        raise SheetLocError("report validation requires the 'jsonschema' package")
    try:
        jsonschema.validate(document, POSE_REPORT_SCHEMA)
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise SheetLocError(f"pose report invalid at {path}: {e.message}")


def save_report(report: PoseReport, path):
    document = report.to_document()
    validate_report_document(document)
    write_document(path, document)
    log_info(config.Messages.REPORT_SAVED.format(path=path))
    return document


def load_report(path, verify=True) -> PoseReport:
    """Load and check a report; raises ParseError or SheetLocError."""
    document = read_document(path, PAYLOAD, verify=verify)
    if document.get("document") != DOCUMENT:
        raise ParseError(f"{path} is a '{document.get('document')}' document, not a pose report")
    try:
        validate_report_document(document)
    except SheetLocError as e:
        log_error(f"Rejected pose report {path}", e)
        raise
    return PoseReport.from_document(document)
