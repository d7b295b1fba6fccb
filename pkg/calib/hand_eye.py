"""Eye-in-hand calibration: solve base_H_tool . tool_H_cam . cam_H_cal = base_H_cal."""

from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

import config
from date_utils import DateUtils
from error_logger import log_calibration, log_debug
from errors import InsufficientMotion, InvalidParameter, TooFewSamples
from geom.transforms import RigidTransform, polar_orthonormalize


@dataclass(frozen=True)
class HandEyeSample:
    """One robot station: the controller's flange pose and the detected plate pose."""

    base_H_tool: RigidTransform = field(compare=False)
    cam_H_cal: RigidTransform = field(compare=False)
    timestamp: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.base_H_tool, RigidTransform) or not isinstance(self.cam_H_cal, RigidTransform):
            raise InvalidParameter("hand-eye samples hold two RigidTransforms")
        if self.timestamp is not None and not DateUtils.is_valid_iso(self.timestamp):
            raise InvalidParameter(f"invalid ISO-8601 timestamp '{self.timestamp}'")

    def to_dict(self):
        data = {"base_H_tool": self.base_H_tool.to_list(), "cam_H_cal": self.cam_H_cal.to_list()}
        if self.timestamp is not None:
            data["timestamp"] = self.timestamp
        return data

    @staticmethod
    def from_dict(data):
        return HandEyeSample(RigidTransform.from_list(data["base_H_tool"]),
                             RigidTransform.from_list(data["cam_H_cal"]), data.get("timestamp"))


@dataclass(frozen=True, eq=False)
class HandEyeResult:
    tool_H_cam: RigidTransform
    base_H_cal: RigidTransform
    residual: float
    closure: np.ndarray

    def to_dict(self):
        return {"tool_H_cam": self.tool_H_cam.to_list(), "base_H_cal": self.base_H_cal.to_list(),
                "residual": float(self.residual), "closure": [float(c) for c in self.closure]}

    @staticmethod
    def from_dict(data):
        return HandEyeResult(RigidTransform.from_list(data["tool_H_cam"]),
                             RigidTransform.from_list(data["base_H_cal"]), float(data["residual"]),
                             np.asarray(data.get("closure", []), dtype=float))


def _relative_motions(samples: Sequence[HandEyeSample]):
    """Rotation vectors (alpha, beta) of tool and camera motions between sample pairs.

    For every pair, A = inv(base_H_tool_j) . base_H_tool_i and
    B = cam_H_cal_j . inv(cam_H_cal_i) satisfy A X = X B, so alpha = R_X beta.
    """
    alphas, betas = [], []
    min_angle = np.deg2rad(config.HandEye.MIN_ROTATION)
    for i, j in combinations(range(len(samples)), 2):
        a = samples[j].base_H_tool.rotation.T @ samples[i].base_H_tool.rotation
        b = samples[j].cam_H_cal.rotation @ samples[i].cam_H_cal.rotation.T
        alpha = Rotation.from_matrix(a).as_rotvec()
        beta = Rotation.from_matrix(b).as_rotvec()
        if np.linalg.norm(alpha) < min_angle or np.linalg.norm(beta) < min_angle:
            continue
        alphas.append(alpha)
        betas.append(beta)
    return np.array(alphas).reshape(-1, 3), np.array(betas).reshape(-1, 3)


def axis_spread_deg(rotvecs):
    """Largest angle between two rotation axes, treating opposite axes as equal."""
    if len(rotvecs) < 2:
        return 0.0
    axes = rotvecs / np.linalg.norm(rotvecs, axis=1, keepdims=True)
    cos = np.clip(np.abs(axes @ axes.T), 0.0, 1.0)
    return float(np.degrees(np.arccos(cos.min())))


def chain_closure(samples: Sequence[HandEyeSample], tool_H_cam: RigidTransform, base_H_cal: RigidTransform):
    """Translation gap (mm) between each sample's chain and base_H_cal."""
    gaps = []
    for sample in samples:
        chained = sample.base_H_tool.compose(tool_H_cam).compose(sample.cam_H_cal)
        gaps.append(np.linalg.norm(chained.translation - base_H_cal.translation))
    return np.array(gaps)


def hand_eye_calibrate(samples: List[HandEyeSample], min_samples=config.HandEye.MIN_SAMPLES):
    """(tool_H_cam, base_H_cal, residual) from robot stations observing a fixed plate.

    The rotation of tool_H_cam aligns the camera motion axes with the tool motion axes
    (least squares over all sample pairs); both translations then follow from one linear
    least-squares system. The residual is the RMS chain-closure gap in mm.
    """
    result = hand_eye_calibrate_detailed(samples, min_samples)
    return result.tool_H_cam, result.base_H_cal, result.residual


def hand_eye_calibrate_detailed(samples: List[HandEyeSample],
                                min_samples=config.HandEye.MIN_SAMPLES) -> HandEyeResult:
    if min_samples < 3:
        raise InvalidParameter("min_samples must be >= 3")
    if len(samples) < min_samples:
        raise TooFewSamples(f"{len(samples)} samples, need {min_samples}")

    alphas, betas = _relative_motions(samples)
    spread = axis_spread_deg(betas)
    if len(betas) < 2 or spread < config.HandEye.MIN_AXIS_SPREAD:
        raise InsufficientMotion(
            f"camera rotation axes span {spread:.2f} deg, need {config.HandEye.MIN_AXIS_SPREAD} deg")
    rotation_x, _ = Rotation.align_vectors(alphas, betas)
    r_x = polar_orthonormalize(rotation_x.as_matrix())

    # R_Ai t_X - t_Z = -t_Ai - R_Ai R_X t_Bi for every sample
    rows, rhs = [], []
    for sample in samples:
        r_a = sample.base_H_tool.rotation
        rows.append(np.hstack([r_a, -np.eye(3)]))
        rhs.append(-sample.base_H_tool.translation - r_a @ r_x @ sample.cam_H_cal.translation)
    solution, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
    tool_H_cam = RigidTransform(r_x, solution[:3])

    chained = Rotation.from_matrix(np.array([
        s.base_H_tool.rotation @ r_x @ s.cam_H_cal.rotation for s in samples]))
    r_z = polar_orthonormalize(chained.mean().as_matrix())
    base_H_cal = RigidTransform(r_z, solution[3:])

    closure = chain_closure(samples, tool_H_cam, base_H_cal)
    residual = float(np.sqrt(np.mean(closure ** 2)))
    log_debug(f"hand-eye: {len(alphas)} motion pairs, axis spread {spread:.1f} deg")
    log_calibration(residual, len(samples))
    return HandEyeResult(tool_H_cam, base_H_cal, residual, closure)
