"""Ground truth of a synthetic render: part poses, visibility and per-point labels."""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from errors import ParseError
from geom.transforms import RigidTransform
from integrity import read_document, sign_document, write_document

LABELS = ("fixture", "part", "ghost")
FIXTURE, PART, GHOST = range(3)

DOCUMENT = "ground_truth"
PAYLOAD = "parts"


@dataclass(frozen=True)
class PartTruth:
    model_id: str
    pose: RigidTransform = field(compare=False)
    cam_pose: RigidTransform = field(compare=False)
    visibility: float = 0.0
    pixel_count: int = 0

    def to_dict(self):
        return {"model_id": self.model_id, "pose": self.pose.to_list(), "cam_pose": self.cam_pose.to_list(),
                "visibility": float(self.visibility), "pixel_count": int(self.pixel_count)}

    @staticmethod
    def from_dict(data):
        return PartTruth(str(data["model_id"]), RigidTransform.from_list(data["pose"]),
                         RigidTransform.from_list(data["cam_pose"]), float(data["visibility"]),
                         int(data["pixel_count"]))


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """`pose` is model->scene, `cam_pose` model->camera. labels[i] and part_index[i]
    describe point i of the rendered cloud (part_index is -1 off parts)."""

    parts: List[PartTruth]
    labels: np.ndarray
    part_index: np.ndarray
    cam_H_scene: RigidTransform

    def label_counts(self):
        counts = np.bincount(self.labels, minlength=len(LABELS))
        return {name: int(counts[k]) for k, name in enumerate(LABELS)}

    def ghost_fraction(self):
        return float(np.mean(self.labels == GHOST)) if len(self.labels) else 0.0

    def part_mask(self, index=None):
        """Points on any part, or on part `index`."""
        if index is None:
            return self.labels == PART
        return (self.labels == PART) & (self.part_index == index)

    def to_dict(self):
        return {"cam_H_scene": self.cam_H_scene.to_list(), "label_counts": self.label_counts(),
                "labels": self.labels.tolist(), "part_index": self.part_index.tolist()}


def save_ground_truth(gt: GroundTruth, path):
    document = sign_document(DOCUMENT, PAYLOAD, [p.to_dict() for p in gt.parts], **gt.to_dict())
    write_document(path, document)


def load_ground_truth(path, verify=True) -> GroundTruth:
    document = read_document(path, PAYLOAD, verify)
    try:
        return GroundTruth([PartTruth.from_dict(p) for p in document[PAYLOAD]],
                           np.asarray(document.get("labels", []), dtype=np.int64),
                           np.asarray(document.get("part_index", []), dtype=np.int64),
                           RigidTransform.from_list(document["cam_H_scene"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed ground truth: {e}")
