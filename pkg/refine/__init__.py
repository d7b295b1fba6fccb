"""
Refinement package for SheetLoc.

Background-removal filters applied to scene clouds before matching.
"""

from .report import FilterReport
from .filters import (ExclusionBox, background_subtract, crop_box, intensity_filter,
                      normal_direction_filter, remove_near_planes,
                      statistical_outlier_removal, z_band_filter)
from .planes import Plane, fit_planes_ransac, required_iterations, segment_and_remove_planes
from .edges import edge_mask, extract_depth_edges

__all__ = [
    'FilterReport', 'ExclusionBox', 'background_subtract', 'crop_box', 'intensity_filter',
    'normal_direction_filter', 'remove_near_planes', 'statistical_outlier_removal',
    'z_band_filter', 'Plane', 'fit_planes_ransac', 'required_iterations',
    'segment_and_remove_planes', 'edge_mask', 'extract_depth_edges',
]
