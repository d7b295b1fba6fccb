"""Match results shared by the surface and shape matchers."""

from dataclasses import dataclass, field, replace
from typing import Optional

from errors import InvalidParameter
from geom.transforms import RigidTransform


@dataclass(frozen=True)
class MatchResult:
    """Candidate model->scene pose with its score in [0, 1] and wall time."""

    model_id: str
    pose: RigidTransform = field(compare=False)
    score: float
    duration: float = 0.0
    surface_score: Optional[float] = None
    edge_score: Optional[float] = None
    votes: int = 0
    flipped: bool = False
    rms: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InvalidParameter(f"score {self.score} outside [0, 1]")
        if self.duration < 0:
            raise InvalidParameter("duration must be >= 0")

    def with_duration(self, duration):
        return replace(self, duration=float(duration))

    def with_pose(self, pose, rms=None):
        return replace(self, pose=pose, rms=rms)

    def to_dict(self):
        data = {
            "model_id": self.model_id,
            "pose": self.pose.to_list(),
            "score": float(self.score),
            "duration": float(self.duration),
        }
        if self.surface_score is not None:
            data["surface_score"] = float(self.surface_score)
        if self.edge_score is not None:
            data["edge_score"] = float(self.edge_score)
        if self.votes:
            data["votes"] = int(self.votes)
        if self.flipped:
            data["flipped"] = True
        if self.rms is not None:
            data["rms"] = float(self.rms)
        return data

    @staticmethod
    def from_dict(data):
        return MatchResult(
            data["model_id"], RigidTransform.from_list(data["pose"]), float(data["score"]),
            float(data.get("duration", 0.0)), data.get("surface_score"), data.get("edge_score"),
            int(data.get("votes", 0)), bool(data.get("flipped", False)), data.get("rms"))


def sort_results(results):
    """Descending score; ties keep their input order."""
    return sorted(results, key=lambda r: -r.score)
