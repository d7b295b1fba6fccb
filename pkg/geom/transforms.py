"""Rigid transforms (rotation + translation, millimetres)."""

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

import config
from errors import InvalidTransform


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def polar_orthonormalize(rotation):
    """Closest rotation matrix (polar factor) with determinant +1."""
    u, _, vt = np.linalg.svd(np.asarray(rotation, dtype=float))
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1.0
        r = u @ vt
    return r


def rotation_error(rotation, tol=config.Tolerances.ROTATION_ORTHO):
    """Largest deviation from orthonormality and from det = +1."""
    r = np.asarray(rotation, dtype=float)
    ortho = np.max(np.abs(r.T @ r - np.eye(3)))
    det = abs(np.linalg.det(r) - 1.0)
    return max(ortho, det)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Homogeneous pose `a_H_b`: maps coordinates in frame b into frame a.

    Immutable; compositions count toward an automatic polar re-orthonormalisation
    every `config.Tolerances.REORTHO_EVERY` steps.
    """

    rotation: np.ndarray
    translation: np.ndarray
    chain: int = field(default=0, repr=False)

    def __post_init__(self):
        rotation = np.asarray(self.rotation, dtype=float)
        translation = np.asarray(self.translation, dtype=float).reshape(-1)
        if rotation.shape != (3, 3) or translation.shape != (3,):
            raise InvalidTransform("rotation must be 3x3 and translation a 3-vector")
        if not (np.all(np.isfinite(rotation)) and np.all(np.isfinite(translation))):
            raise InvalidTransform("transform contains non-finite values")
        err = rotation_error(rotation)
        if err > config.Tolerances.ROTATION_ORTHO:
            raise InvalidTransform(f"rotation not orthonormal (error {err:.3e})")
        object.__setattr__(self, "rotation", _frozen(rotation))
        object.__setattr__(self, "translation", _frozen(translation))

    # ------------------------------------------------------------------ factories

    @staticmethod
    def identity():
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_translation(translation):
        return RigidTransform(np.eye(3), translation)

    @staticmethod
    def from_matrix(matrix, orthonormalize=False):
        """Build from a 4x4 (or 3x4) homogeneous matrix."""
        m = np.asarray(matrix, dtype=float)
        if m.shape not in ((4, 4), (3, 4)):
            raise InvalidTransform(f"expected a 4x4 matrix, got shape {m.shape}")
        rotation = m[:3, :3]
        if orthonormalize:
            rotation = polar_orthonormalize(rotation)
        return RigidTransform(rotation, m[:3, 3])

    @staticmethod
    def from_rotvec(rotvec_rad, translation=(0.0, 0.0, 0.0)):
        return RigidTransform(Rotation.from_rotvec(np.asarray(rotvec_rad, dtype=float)).as_matrix(),
                              translation)

    @staticmethod
    def from_axis_angle(axis, angle_deg, translation=(0.0, 0.0, 0.0)):
        axis = np.asarray(axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0.0:
            raise InvalidTransform("rotation axis has zero length")
        return RigidTransform.from_rotvec(axis / norm * np.deg2rad(angle_deg), translation)

    @staticmethod
    def from_euler_deg(seq, angles_deg, translation=(0.0, 0.0, 0.0)):
        return RigidTransform(Rotation.from_euler(seq, angles_deg, degrees=True).as_matrix(),
                              translation)

    @staticmethod
    def from_list(rows):
        """Inverse of `to_list`: row-major 4x4 nested list (JSON)."""
        return RigidTransform.from_matrix(np.asarray(rows, dtype=float), orthonormalize=True)

    # ------------------------------------------------------------------ algebra

    def as_matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def to_list(self):
        return self.as_matrix().tolist()

    def inverse(self):
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation, self.chain)

    def compose(self, other):
        """self ∘ other: applies `other` first, then `self`."""
        rotation = self.rotation @ other.rotation
        translation = self.rotation @ other.translation + self.translation
        chain = max(self.chain, other.chain) + 1
        if chain >= config.Tolerances.REORTHO_EVERY:
            rotation = polar_orthonormalize(rotation)
            chain = 0
        return RigidTransform(rotation, translation, chain)

    def __matmul__(self, other):
        return self.compose(other)

    def orthonormalized(self):
        return RigidTransform(polar_orthonormalize(self.rotation), self.translation, 0)

    def apply_points(self, points):
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def apply_vectors(self, vectors):
        return np.asarray(vectors, dtype=float) @ self.rotation.T

    def rotation_angle_deg(self):
        return float(np.rad2deg(Rotation.from_matrix(self.rotation).magnitude()))

    def almost_equal(self, other, trans_tol=1e-9, rot_tol_deg=1e-7):
        dt, dr = pose_error(self, other)
        return dt <= trans_tol and dr <= rot_tol_deg

    def __repr__(self):
        rv = np.rad2deg(Rotation.from_matrix(self.rotation).as_rotvec())
        return (f"RigidTransform(rotvec_deg=({rv[0]:.4f}, {rv[1]:.4f}, {rv[2]:.4f}), "
                f"t=({self.translation[0]:.4f}, {self.translation[1]:.4f}, {self.translation[2]:.4f}))")


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Result applies b then a."""
    return a.compose(b)


def inverse(t: RigidTransform) -> RigidTransform:
    return t.inverse()


def pose_error(a: RigidTransform, b: RigidTransform) -> Tuple[float, float]:
    """(translation distance in mm, relative rotation angle in degrees)."""
    dt = float(np.linalg.norm(a.translation - b.translation))
    relative = a.rotation.T @ b.rotation
    dr = float(np.rad2deg(Rotation.from_matrix(relative).magnitude()))
    return dt, dr


def rotation_between(u: Sequence[float], v: Sequence[float]) -> np.ndarray:
    """Minimal rotation matrix taking unit vector u onto unit vector v."""
    u = np.asarray(u, dtype=float) / np.linalg.norm(u)
    v = np.asarray(v, dtype=float) / np.linalg.norm(v)
    axis = np.cross(u, v)
    s = np.linalg.norm(axis)
    c = float(np.dot(u, v))
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        # antiparallel: half turn about any axis orthogonal to u
        helper = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        ortho = np.cross(u, helper)
        ortho /= np.linalg.norm(ortho)
        return Rotation.from_rotvec(ortho * np.pi).as_matrix()
    return Rotation.from_rotvec(axis / s * np.arctan2(s, c)).as_matrix()


def kabsch(source, target, weights=None) -> RigidTransform:
    """Least-squares rigid transform mapping source points onto target points (SVD)."""
    src = np.asarray(source, dtype=float).reshape(-1, 3)
    dst = np.asarray(target, dtype=float).reshape(-1, 3)
    if len(src) != len(dst) or len(src) < 3:
        raise InvalidTransform("kabsch needs at least 3 paired points")
    w = np.ones(len(src)) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()
    src_c = w @ src
    dst_c = w @ dst
    h = (src - src_c).T @ ((dst - dst_c) * w[:, None])
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T)) or 1.0
    rotation = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    rotation = polar_orthonormalize(rotation)
    return RigidTransform(rotation, dst_c - rotation @ src_c)
