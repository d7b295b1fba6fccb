"""Edge templates of workpiece outlines over a rotation grid and a resolution pyramid.

A template is anchored at the outline's area centroid, which sits on a pixel corner:
template offset (dx, dy) covers [dx, dx+1) x [dy, dy+1) pixels from the anchor. The
template at rotation theta describes the outline rotated by theta about that centroid.
"""

import time
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy import ndimage

import config
from error_logger import log_debug, log_error, log_info
from errors import InvalidParameter, ModelCacheVersionError
from match3d.workpiece import WorkpieceModel, points_in_polygon


def rotation_cos_sin(theta_deg):
    """cos/sin of theta with exact values at multiples of 90 degrees."""
    quarter = theta_deg / 90.0
    if float(quarter).is_integer():
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(quarter) % 4]
    rad = np.deg2rad(theta_deg)
    return float(np.cos(rad)), float(np.sin(rad))


def rasterize_outline(outline, centroid, theta_deg, mm_per_px, margin=3):
    """Filled mask of the outline rotated by theta about `centroid`.

    Returns (mask, x0, y0): mask[r, c] is template offset (x0 + c, y0 + r).
    """
    c, s = rotation_cos_sin(theta_deg)
    local = np.asarray(outline, dtype=float) - centroid
    rotated = np.column_stack([c * local[:, 0] - s * local[:, 1], s * local[:, 0] + c * local[:, 1]])
    x0 = int(np.floor(rotated[:, 0].min() / mm_per_px)) - margin
    y0 = int(np.floor(rotated[:, 1].min() / mm_per_px)) - margin
    x1 = int(np.ceil(rotated[:, 0].max() / mm_per_px)) + margin
    y1 = int(np.ceil(rotated[:, 1].max() / mm_per_px)) + margin
    gy, gx = np.mgrid[y0:y1, x0:x1]
    cx = (gx + 0.5) * mm_per_px
    cy = (gy + 0.5) * mm_per_px
    # pixel centres rotated back into the outline's frame
    back = np.column_stack([c * cx.ravel() + s * cy.ravel(), -s * cx.ravel() + c * cy.ravel()])
    mask = points_in_polygon(back + centroid, outline).reshape(gx.shape)
    return mask, x0, y0


@dataclass(frozen=True, eq=False)
class Template:
    """Contour offsets (K, 2) as (dx, dy) ints with unit gradient directions (K, 2)."""

    theta: float
    offsets: np.ndarray
    gradients: np.ndarray

    def __len__(self):
        return len(self.offsets)

    @property
    def reach(self):
        return int(np.abs(self.offsets).max()) if len(self.offsets) else 0


def make_template(outline, centroid, theta_deg, mm_per_px, sigma=config.Shape.SMOOTH_SIGMA) -> Template:
    mask, x0, y0 = rasterize_outline(outline, centroid, theta_deg, mm_per_px)
    contour = mask & ~ndimage.binary_erosion(mask)
    smooth = ndimage.gaussian_filter(mask.astype(float), sigma)
    gx = ndimage.sobel(smooth, axis=1)
    gy = ndimage.sobel(smooth, axis=0)
    rows, cols = np.nonzero(contour)
    g = np.column_stack([gx[rows, cols], gy[rows, cols]])
    length = np.linalg.norm(g, axis=1)
    ok = length > 1e-9
    offsets = np.column_stack([cols[ok] + x0, rows[ok] + y0]).astype(np.int64)
    return Template(float(theta_deg), offsets, g[ok] / length[ok, None])


@dataclass(frozen=True, eq=False)
class TemplatePyramid:
    """Per-level rotation grids of edge templates for one model.

    Level l works at mm_per_px * 2**l with a rotation step of theta_step * 2**l.
    """

    model_id: str
    theta_step: float
    mm_per_px: float
    levels: int
    centroid: np.ndarray
    templates: List[List[Template]]

    def resolution(self, level):
        return self.mm_per_px * 2 ** level

    def step(self, level):
        return self.theta_step * 2 ** level

    def thetas(self, level):
        return np.array([t.theta for t in self.templates[level]])

    def template_at(self, level, theta):
        """Template whose grid angle is closest to theta (mod 360)."""
        step = self.step(level)
        k = int(round((theta % 360.0) / step)) % len(self.templates[level])
        return self.templates[level][k]

    def diameter_px(self, level=0):
        t = self.templates[level][0]
        extent = t.offsets.max(axis=0) - t.offsets.min(axis=0)
        return float(np.hypot(*extent))


def build_template(m: WorkpieceModel, theta_step=config.Shape.THETA_STEP, mm_per_px=config.Shape.MM_PER_PX,
                   levels=config.Shape.LEVELS) -> TemplatePyramid:
    """Rasterise the outline for every rotation on every pyramid level."""
    started = time.perf_counter()
    if not theta_step > 0 or not (360.0 / theta_step).is_integer():
        raise InvalidParameter("theta_step must divide 360")
    if not mm_per_px > 0:
        raise InvalidParameter("mm_per_px must be > 0")
    if levels < 1:
        raise InvalidParameter("levels must be >= 1")

    centroid = m.centroid
    pyramid = []
    for level in range(levels):
        step = theta_step * 2 ** level
        if not (360.0 / step).is_integer():
            raise InvalidParameter(f"rotation step {step} at level {level} does not divide 360")
        res = mm_per_px * 2 ** level
        thetas = np.arange(int(round(360.0 / step))) * step
        pyramid.append([make_template(m.outline, centroid, theta, res) for theta in thetas])

    tpl = TemplatePyramid(m.id, float(theta_step), float(mm_per_px), int(levels), centroid, pyramid)
    log_info(f"Templates '{m.id}': {levels} levels, {len(pyramid[0])} rotations, "
             f"{len(pyramid[0][0])} contour points at level 0 in {time.perf_counter() - started:.2f}s")
    return tpl


def render_outline_image(placements, shape, mm_per_px, background=0.0, sigma=0.0):
    """Synthetic intensity image of flat parts: placements are (model, u, v, theta, value).

    (u, v) is the anchor in continuous pixel coordinates, as returned by shape matching.
    Later placements paint over earlier ones.
    """
    image = np.full(shape, float(background))
    rows, cols = np.mgrid[0:shape[0], 0:shape[1]]
    for model, u, v, theta, value in placements:
        c, s = rotation_cos_sin(theta)
        x = (cols + 0.5 - u) * mm_per_px
        y = (rows + 0.5 - v) * mm_per_px
        back = np.column_stack([c * x.ravel() + s * y.ravel(), -s * x.ravel() + c * y.ravel()])
        inside = points_in_polygon(back + model.centroid, model.outline).reshape(shape)
        image[inside] = value
    if sigma > 0:
        image = ndimage.gaussian_filter(image, sigma)
    return image


def save_templates(tpl: TemplatePyramid, path):
    """Cache a pyramid as .npz with a version tag."""
    arrays = {"version": np.int64(config.Shape.CACHE_VERSION), "model_id": np.array(tpl.model_id),
              "meta": np.array([tpl.theta_step, tpl.mm_per_px, tpl.levels]), "centroid": tpl.centroid}
    for level, templates in enumerate(tpl.templates):
        for k, t in enumerate(templates):
            arrays[f"o_{level}_{k}"] = t.offsets
            arrays[f"g_{level}_{k}"] = t.gradients
            arrays[f"t_{level}_{k}"] = np.float64(t.theta)
    try:
        with open(path, "wb") as f:
            np.savez_compressed(f, **arrays)
    except OSError as e:
        log_error(f"Failed to write template cache {path}", e)
        raise
    log_debug(f"Templates '{tpl.model_id}' cached to {path}")


def load_templates(path) -> TemplatePyramid:
    try:
        with np.load(path, allow_pickle=False) as data:
            version = int(data["version"])
            if version != config.Shape.CACHE_VERSION:
                raise ModelCacheVersionError(
                    f"{path}: cache version {version}, expected {config.Shape.CACHE_VERSION}")
            theta_step, mm_per_px, levels = data["meta"]
            levels = int(levels)
            pyramid = []
            for level in range(levels):
                count = int(round(360.0 / (theta_step * 2 ** level)))
                pyramid.append([Template(float(data[f"t_{level}_{k}"]), data[f"o_{level}_{k}"],
                                         data[f"g_{level}_{k}"]) for k in range(count)])
            return TemplatePyramid(str(data["model_id"]), float(theta_step), float(mm_per_px), levels,
                                   data["centroid"], pyramid)
    except OSError as e:
        log_error(f"Failed to read template cache {path}", e)
        raise
    except KeyError as e:
        raise ModelCacheVersionError(f"{path}: missing field {e}")
