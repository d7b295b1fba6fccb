"""
Surface-based matching package for SheetLoc.

Workpiece models, point-pair-feature voting, pose clustering, scoring and ICP.
"""

from .workpiece import WorkpieceModel, points_in_polygon, sample_model, truncate_model
from .registry import builtin_models, load_model_registry, save_model_registry
from .ppf import (PpfModel, build_ppf_model, build_ppf_model_for, load_ppf_model,
                  reference_votes, save_ppf_model)
from .results import MatchResult, sort_results
from .surface_match import (MatchParams, cluster_poses, edge_supported_match, flip_transform,
                            match_models, score_pose, surface_based_match)
from .icp import IcpResult, icp_refine, icp_refine_detailed

__all__ = [
    'WorkpieceModel', 'points_in_polygon', 'sample_model', 'truncate_model',
    'builtin_models', 'load_model_registry', 'save_model_registry',
    'PpfModel', 'build_ppf_model', 'build_ppf_model_for', 'load_ppf_model', 'reference_votes',
    'save_ppf_model', 'MatchResult', 'sort_results', 'MatchParams', 'cluster_poses',
    'edge_supported_match', 'flip_transform', 'match_models', 'score_pose',
    'surface_based_match', 'IcpResult', 'icp_refine', 'icp_refine_detailed',
]
