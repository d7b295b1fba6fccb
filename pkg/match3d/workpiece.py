"""Sheet-metal workpiece models: a planar outline extruded by the sheet thickness.

Model frame: outline in the xy plane, bottom face at z = 0, top face at z = thickness.
"""

import math
from dataclasses import dataclass, field

import numpy as np

import config
from errors import DegeneratePolygon, InvalidParameter
from geom.cloud import PointCloud


def polygon_area(outline):
    """Signed shoelace area; positive for counter-clockwise outlines."""
    x, y = outline[:, 0], outline[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(p1, p2, q1, q2):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def on_segment(a, b, c):
        return (min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
                and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12)

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    return ((d1 == 0 and on_segment(q1, q2, p1)) or (d2 == 0 and on_segment(q1, q2, p2))
            or (d3 == 0 and on_segment(p1, p2, q1)) or (d4 == 0 and on_segment(p1, p2, q2)))


def is_simple_polygon(outline):
    """No two non-adjacent edges touch or cross."""
    k = len(outline)
    for i in range(k):
        a1, a2 = outline[i], outline[(i + 1) % k]
        for j in range(i + 1, k):
            if j == i or (j + 1) % k == i or (i + 1) % k == j:
                continue
            if _segments_cross(a1, a2, outline[j], outline[(j + 1) % k]):
                return False
    return True


def points_in_polygon(xy, outline):
    """Even-odd test of 2D points against the outline (vectorised ray casting)."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    x, y = xy[:, 0:1], xy[:, 1:2]
    ax, ay = outline[:, 0], outline[:, 1]
    bx, by = np.roll(ax, -1), np.roll(ay, -1)
    straddle = (ay > y) != (by > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = ax + (y - ay) * (bx - ax) / (by - ay)
    hits = straddle & (x < x_cross)
    return (hits.sum(axis=1) % 2) == 1


def validate_outline(outline):
    """Return the outline as a CCW (K, 2) array or raise DegeneratePolygon."""
    outline = np.asarray(outline, dtype=float)
    if outline.ndim != 2 or outline.shape[1] != 2 or len(outline) < 3:
        raise DegeneratePolygon("outline needs at least 3 vertices (K, 2)")
    if not np.all(np.isfinite(outline)):
        raise DegeneratePolygon("outline has non-finite vertices")
    if np.allclose(outline[0], outline[-1]):
        outline = outline[:-1]
        if len(outline) < 3:
            raise DegeneratePolygon("outline needs at least 3 distinct vertices")
    area = polygon_area(outline)
    if abs(area) <= config.Tolerances.POLYGON_AREA_MIN:
        raise DegeneratePolygon("outline has zero area")
    if not is_simple_polygon(outline):
        raise DegeneratePolygon("outline is self-intersecting")
    return outline if area > 0 else outline[::-1].copy()


def _face_samples(outline, step):
    lo, hi = outline.min(axis=0), outline.max(axis=0)
    xs = np.arange(lo[0] + step / 2.0, hi[0], step)
    ys = np.arange(lo[1] + step / 2.0, hi[1], step)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    return grid[points_in_polygon(grid, outline)]


def _wall_samples(outline, thickness, step):
    levels = max(1, int(round(thickness / step)))
    z = (np.arange(levels) + 0.5) * thickness / levels
    points, normals = [], []
    for a, b in zip(outline, np.roll(outline, -1, axis=0)):
        edge = b - a
        length = float(np.hypot(edge[0], edge[1]))
        segments = max(1, int(math.ceil(length / step)))
        t = (np.arange(segments) + 0.5) / segments
        xy = a + t[:, None] * edge
        outward = np.array([edge[1], -edge[0], 0.0]) / length
        for zk in z:
            points.append(np.column_stack([xy, np.full(segments, zk)]))
            normals.append(np.tile(outward, (segments, 1)))
    return np.vstack(points), np.vstack(normals)


def sample_surface(outline, thickness, step):
    """(points, normals) over top, bottom and side walls with outward normals."""
    face = _face_samples(outline, step)
    top = np.column_stack([face, np.full(len(face), thickness)])
    bottom = np.column_stack([face, np.zeros(len(face))])
    wall_pts, wall_nrm = _wall_samples(outline, thickness, step)
    points = [top, bottom, wall_pts]
    normals = [np.tile([0.0, 0.0, 1.0], (len(top), 1)), np.tile([0.0, 0.0, -1.0], (len(bottom), 1)),
               wall_nrm]
    if sum(len(p) for p in points) < config.Model.MIN_POINTS:
        # corner floor for steps coarser than the part
        k = len(outline)
        points += [np.column_stack([outline, np.full(k, thickness)]), np.column_stack([outline, np.zeros(k)])]
        normals += [np.tile([0.0, 0.0, 1.0], (k, 1)), np.tile([0.0, 0.0, -1.0], (k, 1))]
    return np.vstack(points), np.vstack(normals)


def sample_rims(outline, thickness, step):
    """Points along the top and bottom outline; normals are the face normals (+z top, -z bottom)."""
    rim = []
    for a, b in zip(outline, np.roll(outline, -1, axis=0)):
        length = float(np.linalg.norm(b - a))
        segments = max(1, int(math.ceil(length / step)))
        t = np.arange(segments) / segments
        rim.append(a + t[:, None] * (b - a))
    rim = np.vstack(rim)
    k = len(rim)
    points = np.vstack([np.column_stack([rim, np.full(k, thickness)]),
                        np.column_stack([rim, np.zeros(k)])])
    normals = np.vstack([np.tile([0.0, 0.0, 1.0], (k, 1)), np.tile([0.0, 0.0, -1.0], (k, 1))])
    return points, normals


@dataclass(frozen=True, eq=False)
class WorkpieceModel:
    """Extruded polygon standing in for the CAD model of a sheet-metal part."""

    id: str
    outline: np.ndarray
    thickness: float
    sample_step: float = config.Model.SAMPLE_STEP
    sampled_cloud: PointCloud = field(init=False, repr=False)
    edge_cloud: PointCloud = field(init=False, repr=False)

    def __post_init__(self):
        if not self.thickness > 0:
            raise InvalidParameter("thickness must be > 0")
        if not self.sample_step > 0:
            raise InvalidParameter("sample_step must be > 0")
        outline = validate_outline(self.outline)
        outline.setflags(write=False)
        object.__setattr__(self, "outline", outline)
        object.__setattr__(self, "thickness", float(self.thickness))
        points, normals = sample_surface(outline, self.thickness, self.sample_step)
        object.__setattr__(self, "sampled_cloud", PointCloud(points, normals, None, "model"))
        points, normals = sample_rims(outline, self.thickness, self.sample_step)
        object.__setattr__(self, "edge_cloud", PointCloud(points, normals, None, "model"))

    @property
    def area(self):
        return polygon_area(self.outline)

    @property
    def centroid(self):
        """Area centroid of the outline (x, y)."""
        x, y = self.outline[:, 0], self.outline[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        a = cross.sum() / 2.0
        return np.array([((x + xn) * cross).sum() / (6 * a), ((y + yn) * cross).sum() / (6 * a)])

    @property
    def diameter(self):
        """Largest distance between two points of the solid."""
        corners = np.vstack([np.column_stack([self.outline, np.zeros(len(self.outline))]),
                             np.column_stack([self.outline, np.full(len(self.outline), self.thickness)])])
        diff = corners[:, None, :] - corners[None, :, :]
        return float(np.sqrt((diff ** 2).sum(axis=2)).max())

    def contains_xy(self, xy):
        return points_in_polygon(xy, self.outline)

    def with_step(self, step):
        return WorkpieceModel(self.id, self.outline, self.thickness, step)

    def to_dict(self):
        return {"id": self.id, "outline": self.outline.tolist(), "thickness": self.thickness,
                "sample_step": self.sample_step}

    @staticmethod
    def from_dict(data):
        return WorkpieceModel(str(data["id"]), data["outline"], float(data["thickness"]),
                              float(data.get("sample_step", config.Model.SAMPLE_STEP)))


def sample_model(m: WorkpieceModel, step) -> PointCloud:
    """Quasi-uniform surface sampling of the extruded outline at `step` spacing."""
    if not step > 0:
        raise InvalidParameter("step must be > 0")
    points, normals = sample_surface(m.outline, m.thickness, step)
    return PointCloud(points, normals, None, "model")


def _clip(polygon, axis, bound, keep_greater):
    out = []
    k = len(polygon)
    for i in range(k):
        cur, nxt = polygon[i], polygon[(i + 1) % k]
        cur_in = cur[axis] >= bound if keep_greater else cur[axis] <= bound
        nxt_in = nxt[axis] >= bound if keep_greater else nxt[axis] <= bound
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            t = (bound - cur[axis]) / (nxt[axis] - cur[axis])
            out.append(cur + t * (nxt - cur))
    return np.array(out) if out else np.zeros((0, 2))


def truncate_model(m: WorkpieceModel, keep_min, keep_max, model_id=None) -> WorkpieceModel:
    """Model of the part clipped to the xy rectangle [keep_min, keep_max] of its own frame.

    The clipped model keeps the original model frame, so its pose is the full part's pose.
    """
    polygon = np.array(m.outline, dtype=float)
    for axis in (0, 1):
        polygon = _clip(polygon, axis, float(keep_min[axis]), True)
        if len(polygon) < 3:
            raise DegeneratePolygon("truncation leaves nothing of the outline")
        polygon = _clip(polygon, axis, float(keep_max[axis]), False)
        if len(polygon) < 3:
            raise DegeneratePolygon("truncation leaves nothing of the outline")
    # drop vertices duplicated by clipping through a corner
    keep = np.ones(len(polygon), dtype=bool)
    keep[1:] = np.linalg.norm(np.diff(polygon, axis=0), axis=1) > 1e-9
    polygon = polygon[keep]
    if len(polygon) > 1 and np.linalg.norm(polygon[0] - polygon[-1]) <= 1e-9:
        polygon = polygon[:-1]
    return WorkpieceModel(model_id or f"{m.id}_truncated", polygon, m.thickness, m.sample_step)
