"""Coarse-to-fine template search over (u, v, theta) on gradient directions.

The similarity of a template placed at anchor (u, v) with rotation theta is the mean
absolute cosine between each contour point's gradient direction and the image gradient
direction under it. Pixels outside the image, invalid pixels and pixels without a usable
gradient contribute 0, which makes the score tolerant to occlusion and indifferent to
contrast polarity.
"""

import time
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

import numpy as np
from scipy import ndimage

import config
from error_logger import log_debug, log_info
from errors import InvalidParameter
from geom.depth_image import DepthImage
from match2d.templates import Template, TemplatePyramid


@dataclass(frozen=True)
class PlanarMatch:
    """Template anchor (u, v) in continuous level-0 pixel coordinates plus rotation in degrees."""

    u: float
    v: float
    theta: float
    level: int
    score: float
    model_id: str = ""

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InvalidParameter(f"score {self.score} outside [0, 1]")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class GradientLevel:
    """Unit gradient directions of one pyramid level; zero where unusable."""

    gx: np.ndarray
    gy: np.ndarray

    @property
    def shape(self):
        return self.gx.shape


def _normalized(img: DepthImage):
    """Values scaled to [0, 1] with holes filled from the nearest valid pixel."""
    values = img.values
    valid = img.mask
    lo, hi = float(np.min(values[valid])), float(np.max(values[valid]))
    scaled = np.zeros(values.shape) if hi <= lo else (values - lo) / (hi - lo)
    if not valid.all():
        _, (rows, cols) = ndimage.distance_transform_edt(~valid, return_indices=True)
        scaled = scaled[rows, cols]
    return scaled


def _block_mean(array, factor):
    h, w = array.shape[0] // factor, array.shape[1] // factor
    return array[:h * factor, :w * factor].reshape(h, factor, w, factor).mean(axis=(1, 3))


def prepare_gradients(img: DepthImage, levels, sigma=config.Shape.SMOOTH_SIGMA,
                      min_gradient=config.Shape.MIN_GRADIENT) -> List[GradientLevel]:
    """Gradient pyramid of an image; level l block-averages 2**l x 2**l pixels.

    Returns an empty list when the image has no valid pixel. Levels that would be smaller
    than 3 x 3 pixels are dropped.
    """
    if img.valid_count == 0:
        return []
    scaled = _normalized(img)
    valid = img.mask.astype(float)
    pyramid = []
    for level in range(levels):
        factor = 2 ** level
        if min(scaled.shape) // factor < 3:
            break
        values = _block_mean(scaled, factor)
        usable = _block_mean(valid, factor) >= 0.5
        smooth = ndimage.gaussian_filter(values, sigma)
        gx = ndimage.sobel(smooth, axis=1) / 8.0
        gy = ndimage.sobel(smooth, axis=0) / 8.0
        magnitude = np.hypot(gx, gy)
        keep = usable & (magnitude >= min_gradient)
        safe = np.where(keep, magnitude, 1.0)
        pyramid.append(GradientLevel(np.where(keep, gx / safe, 0.0), np.where(keep, gy / safe, 0.0)))
    return pyramid


def score_map(grad: GradientLevel, template: Template):
    """Similarity of `template` anchored at every pixel corner of the level."""
    h, w = grad.shape
    if len(template) == 0:
        return np.zeros((h, w))
    reach = template.reach
    gx = np.pad(grad.gx, reach)
    gy = np.pad(grad.gy, reach)
    acc = np.zeros((h, w))
    for (dx, dy), (tx, ty) in zip(template.offsets, template.gradients):
        r0, c0 = reach + dy, reach + dx
        acc += np.abs(gx[r0:r0 + h, c0:c0 + w] * tx + gy[r0:r0 + h, c0:c0 + w] * ty)
    return acc / len(template)


def scores_at(grad: GradientLevel, template: Template, us, vs):
    """Similarity at integer anchors (us[i], vs[i])."""
    us = np.asarray(us, dtype=np.int64).ravel()
    vs = np.asarray(vs, dtype=np.int64).ravel()
    if len(template) == 0:
        return np.zeros(len(us))
    h, w = grad.shape
    cols = us[:, None] + template.offsets[None, :, 0]
    rows = vs[:, None] + template.offsets[None, :, 1]
    inside = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
    cols = np.clip(cols, 0, w - 1)
    rows = np.clip(rows, 0, h - 1)
    dots = grad.gx[rows, cols] * template.gradients[:, 0] + grad.gy[rows, cols] * template.gradients[:, 1]
    return np.where(inside, np.abs(dots), 0.0).mean(axis=1)


def _coarse_candidates(grad: GradientLevel, tpl: TemplatePyramid, level, floor):
    templates = tpl.templates[level]
    maps = np.stack([score_map(grad, t) for t in templates])
    # theta wraps around; positions do not
    local_max = ndimage.maximum_filter(maps, size=3, mode=("wrap", "constant", "constant"), cval=-1.0)
    k, rows, cols = np.nonzero((maps == local_max) & (maps >= floor))
    scores = maps[k, rows, cols]
    order = np.argsort(-scores, kind="stable")[:config.Shape.COARSE_CANDIDATES]
    return [(int(cols[i]), int(rows[i]), templates[k[i]].theta, float(scores[i])) for i in order]


def _refine(grad: GradientLevel, tpl: TemplatePyramid, level, u, v, theta):
    """Best anchor/rotation at `level` around a hit from the level above."""
    window = np.arange(-config.Shape.REFINE_WINDOW, config.Shape.REFINE_WINDOW + 1)
    h, w = grad.shape
    us, vs = np.meshgrid(np.clip(2 * u + window, 0, w - 1), np.clip(2 * v + window, 0, h - 1))
    us, vs = us.ravel(), vs.ravel()
    spread = int(round(tpl.step(level + 1) / tpl.step(level)))
    best = (-1.0, u, v, theta)
    for k in range(-spread, spread + 1):
        template = tpl.template_at(level, theta + k * tpl.step(level))
        scores = scores_at(grad, template, us, vs)
        i = int(np.argmax(scores))
        if scores[i] > best[0]:
            best = (float(scores[i]), int(us[i]), int(vs[i]), template.theta)
    score, u, v, theta = best
    return u, v, theta, score


def _parabola_offset(minus, centre, plus):
    """Vertex of the parabola through (-1, minus), (0, centre), (1, plus), clipped to +-0.5."""
    curvature = minus - 2.0 * centre + plus
    if curvature >= 0.0:
        return 0.0
    return float(np.clip(0.5 * (minus - plus) / curvature, -0.5, 0.5))


def _sub_pixel(grad: GradientLevel, tpl: TemplatePyramid, u, v, theta, score):
    template = tpl.template_at(0, theta)
    around = scores_at(grad, template, [u - 1, u + 1, u, u], [v, v, v - 1, v + 1])
    du = _parabola_offset(around[0], score, around[1])
    dv = _parabola_offset(around[2], score, around[3])
    step = tpl.step(0)
    turned = [scores_at(grad, tpl.template_at(0, theta + s * step), [u], [v])[0] for s in (-1, 1)]
    dtheta = _parabola_offset(turned[0], score, turned[1]) * step
    h, w = grad.shape
    return (float(np.clip(u + du, 0.0, w - 1)), float(np.clip(v + dv, 0.0, h - 1)),
            float((theta + dtheta) % 360.0))


def _suppress(matches: List[PlanarMatch], radius):
    kept: List[PlanarMatch] = []
    for match in sorted(matches, key=lambda m: -m.score):
        if all(np.hypot(match.u - k.u, match.v - k.v) > radius for k in kept):
            kept.append(match)
    return kept


def search(gradients: List[GradientLevel], tpl: TemplatePyramid, min_score=config.Shape.MIN_SCORE,
           max_matches=config.Shape.MAX_MATCHES) -> List[PlanarMatch]:
    """Template search on a prepared gradient pyramid."""
    if not gradients:
        return []
    top = min(tpl.levels, len(gradients)) - 1
    floor = max(config.Shape.COARSE_SCORE_FACTOR * min_score, 1e-9)
    candidates = _coarse_candidates(gradients[top], tpl, top, floor)

    matches = []
    for u, v, theta, score in candidates:
        for level in range(top - 1, -1, -1):
            u, v, theta, score = _refine(gradients[level], tpl, level, u, v, theta)
        if score < min_score or score <= 0.0:
            continue
        su, sv, stheta = _sub_pixel(gradients[0], tpl, u, v, theta, score)
        matches.append(PlanarMatch(su, sv, stheta, 0, float(min(score, 1.0)), tpl.model_id))

    radius = config.Shape.NMS_RADIUS_REL * tpl.diameter_px(0)
    return _suppress(matches, radius)[:max_matches]


def _check_inputs(img: DepthImage, tpl: TemplatePyramid, min_score, max_matches):
    if not 0.0 <= min_score <= 1.0:
        raise InvalidParameter("min_score must lie in [0, 1]")
    if max_matches < 1:
        raise InvalidParameter("max_matches must be >= 1")
    if img.ortho is not None and abs(img.ortho.mm_per_px - tpl.mm_per_px) > 1e-9:
        raise InvalidParameter(
            f"image resolution {img.ortho.mm_per_px} mm/px differs from template {tpl.mm_per_px} mm/px")


def shape_match(img: DepthImage, tpl: TemplatePyramid, min_score=config.Shape.MIN_SCORE,
                max_matches=config.Shape.MAX_MATCHES) -> List[PlanarMatch]:
    """Locate the template's part in an image; matches sorted by descending score.

    A blank or fully invalid image yields an empty list.
    """
    started = time.perf_counter()
    _check_inputs(img, tpl, min_score, max_matches)
    matches = search(prepare_gradients(img, tpl.levels), tpl, min_score, max_matches)
    log_debug(f"shape match '{tpl.model_id}': {len(matches)} matches in "
              f"{time.perf_counter() - started:.3f}s")
    return matches


def recognize(img: DepthImage, pyramids: Dict[str, TemplatePyramid],
              min_score=config.Shape.MIN_SCORE) -> Optional[PlanarMatch]:
    """Best match over several models; its model_id names the recognised part."""
    if not pyramids:
        raise InvalidParameter("no template pyramids given")
    started = time.perf_counter()
    levels = max(tpl.levels for tpl in pyramids.values())
    gradients = prepare_gradients(img, levels)
    best = None
    for model_id in sorted(pyramids):
        tpl = pyramids[model_id]
        _check_inputs(img, tpl, min_score, 1)
        for match in search(gradients, tpl, min_score, 1):
            if best is None or match.score > best.score:
                best = match
    if best is not None:
        log_info(f"Recognised '{best.model_id}' at ({best.u:.1f}, {best.v:.1f}) px, "
                 f"{best.theta:.1f} deg, score {best.score:.3f} in {time.perf_counter() - started:.3f}s")
    return best
