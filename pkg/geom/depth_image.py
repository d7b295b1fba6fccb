"""Depth and intensity images, orthographic grids, and projection of clouds onto them."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from errors import EmptyCloud, InvalidParameter, WrongImageKind
from geom.camera import CameraModel
from geom.cloud import PointCloud
from geom.transforms import RigidTransform

KINDS = ("depth", "intensity")


@dataclass(frozen=True, eq=False)
class OrthoGrid:
    """Placement of an orthographic image.

    Grid coordinates are (a, b, value) in millimetres: a runs along image columns, b along
    rows, and the third axis is the projection axis. `source_H_grid` maps grid coordinates
    into the frame of the cloud the image was made from. Pixel (row, col) covers
    a in [origin_a + col*mm_per_px, origin_a + (col+1)*mm_per_px), likewise for b.
    `value_range` (lo, hi) is set on intensity images: intensity = (value - lo) / (hi - lo).
    """

    source_H_grid: RigidTransform
    mm_per_px: float
    origin: Tuple[float, float]
    value_range: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if not self.mm_per_px > 0:
            raise InvalidParameter("mm_per_px must be > 0")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        if self.value_range is not None:
            object.__setattr__(self, "value_range",
                               (float(self.value_range[0]), float(self.value_range[1])))

    def grid_xy(self, cols, rows):
        """Grid (a, b) of continuous pixel coordinates (col, row)."""
        a = self.origin[0] + np.asarray(cols, dtype=float) * self.mm_per_px
        b = self.origin[1] + np.asarray(rows, dtype=float) * self.mm_per_px
        return a, b

    def to_source(self, a, b, value):
        grid = np.stack([np.asarray(a, dtype=float), np.asarray(b, dtype=float),
                         np.asarray(value, dtype=float)], axis=-1)
        return self.source_H_grid.apply_points(grid)

    def encode(self, value):
        lo, hi = self.value_range
        if hi <= lo:
            return np.ones_like(np.asarray(value, dtype=float))
        return (np.asarray(value, dtype=float) - lo) / (hi - lo)

    def decode(self, intensity):
        lo, hi = self.value_range
        return lo + np.asarray(intensity, dtype=float) * (hi - lo)

    def to_dict(self):
        return {
            "source_H_grid": self.source_H_grid.to_list(),
            "mm_per_px": self.mm_per_px,
            "origin": list(self.origin),
            "value_range": None if self.value_range is None else list(self.value_range),
        }

    @staticmethod
    def from_dict(data):
        return OrthoGrid(RigidTransform.from_list(data["source_H_grid"]), float(data["mm_per_px"]),
                         tuple(data["origin"]),
                         None if data.get("value_range") is None else tuple(data["value_range"]))


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Row-major scalar grid (height, width) with an explicit validity mask.

    Invalid pixels hold NaN and are excluded from every statistic. Depth values are
    millimetres; intensity values lie in [0, 1]. A perspective image carries `camera`
    (and optionally `cam_pose`, the camera in the scene frame); an orthographic one
    carries `ortho`.
    """

    values: np.ndarray
    kind: str = "depth"
    mask: Optional[np.ndarray] = None
    camera: Optional[CameraModel] = None
    cam_pose: Optional[RigidTransform] = None
    ortho: Optional[OrthoGrid] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"kind must be one of {KINDS}, got '{self.kind}'")
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise InvalidParameter("values must be a 2D grid")
        mask = np.isfinite(values) if self.mask is None else np.asarray(self.mask, dtype=bool)
        if mask.shape != values.shape:
            raise InvalidParameter("mask shape differs from values")
        mask = mask & np.isfinite(values)
        values[~mask] = np.nan
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def valid_count(self):
        return int(self.mask.sum())

    def valid_values(self):
        return self.values[self.mask]

    def require_kind(self, kind):
        if self.kind != kind:
            raise WrongImageKind(f"expected a {kind} image, got {self.kind}")

    def filled(self, fill=0.0):
        """Copy of the values with invalid pixels replaced by `fill`."""
        return np.where(self.mask, self.values, fill)

    def with_values(self, values, mask=None, kind=None):
        return DepthImage(values, kind or self.kind, mask, self.camera, self.cam_pose, self.ortho)


def _basis(axis):
    axis = np.asarray(axis, dtype=float)
    helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) <= 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = helper - np.dot(helper, axis) * axis
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return e1, e2


def rasterize(a, b, values, mm_per_px, keep="min", origin=None, shape=None):
    """Bin scattered (a, b, value) samples into a grid keeping the min or max per pixel.

    Without `origin` the grid starts at the smallest (a, b); without `shape` it just covers
    all samples. Samples falling outside a given shape are dropped. Returns
    (grid with NaN for empty pixels, origin).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    values = np.asarray(values, dtype=float)
    if origin is None:
        origin = (float(a.min()), float(b.min()))
    cols = np.floor((a - origin[0]) / mm_per_px).astype(np.int64)
    rows = np.floor((b - origin[1]) / mm_per_px).astype(np.int64)
    if shape is None:
        shape = (int(rows.max()) + 1, int(cols.max()) + 1)
    inside = (rows >= 0) & (rows < shape[0]) & (cols >= 0) & (cols < shape[1])
    flat = rows[inside] * shape[1] + cols[inside]

    if keep == "min":
        grid = np.full(shape[0] * shape[1], np.inf)
        np.minimum.at(grid, flat, values[inside])
    elif keep == "max":
        grid = np.full(shape[0] * shape[1], -np.inf)
        np.maximum.at(grid, flat, values[inside])
    else:
        raise InvalidParameter(f"keep must be 'min' or 'max', got '{keep}'")
    grid[~np.isfinite(grid)] = np.nan
    return grid.reshape(shape), origin


def project_to_depth_image(c: PointCloud, axis, resolution_mm_per_px) -> DepthImage:
    """Orthographic depth image of c looking along `axis`.

    Each pixel holds the smallest p . axis among the points binned into it. The grid
    axes are e1 (the x-axis made orthogonal to `axis`, or the y-axis when `axis` is close
    to x) and e2 = axis x e1.
    """
    if c.is_empty():
        raise EmptyCloud("cannot project an empty cloud")
    axis = np.asarray(axis, dtype=float).reshape(3)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-6:
        raise InvalidParameter("axis must be unit length")
    axis = axis / np.linalg.norm(axis)
    if not resolution_mm_per_px > 0:
        raise InvalidParameter("resolution_mm_per_px must be > 0")

    e1, e2 = _basis(axis)
    a = c.points @ e1
    b = c.points @ e2
    depth = c.points @ axis
    grid, origin = rasterize(a, b, depth, resolution_mm_per_px, keep="min")
    source_H_grid = RigidTransform(np.column_stack([e1, e2, axis]), np.zeros(3))
    return DepthImage(grid, "depth", ortho=OrthoGrid(source_H_grid, resolution_mm_per_px, origin))
