"""
Shape-based matching package for SheetLoc.

Contrast-enhanced depth images, outline template pyramids, coarse-to-fine gradient
search and lifting of planar matches to 6D poses.
"""

from .contrast import make_contrast_depth_image
from .templates import (Template, TemplatePyramid, build_template, load_templates,
                        render_outline_image, save_templates)
from .shape_match import PlanarMatch, prepare_gradients, recognize, shape_match
from .lift import lift_to_6d, part_pixels

__all__ = [
    'make_contrast_depth_image', 'Template', 'TemplatePyramid', 'build_template',
    'load_templates', 'render_outline_image', 'save_templates', 'PlanarMatch',
    'prepare_gradients', 'recognize', 'shape_match', 'lift_to_6d', 'part_pixels',
]
