"""
Geometry package for SheetLoc.

Points, clouds, rigid transforms, neighbour queries, normals, downsampling,
orthographic projection and file I/O shared by every other package.
"""

from .transforms import RigidTransform, compose, inverse, kabsch, pose_error, rotation_between
from .cloud import Point3, PointCloud, apply
from .camera import CameraModel
from .neighbors import NeighborIndex, squared_distances
from .normals import estimate_normals
from .sampling import voxel_downsample
from .depth_image import DepthImage, OrthoGrid, project_to_depth_image, rasterize
from .ply_io import read_ply, write_ply
from .image_io import export_preview_png, read_depth_image, write_depth_image

__all__ = [
    'RigidTransform', 'compose', 'inverse', 'kabsch', 'pose_error', 'rotation_between',
    'Point3', 'PointCloud', 'apply', 'CameraModel', 'NeighborIndex', 'squared_distances',
    'estimate_normals', 'voxel_downsample', 'DepthImage', 'OrthoGrid',
    'project_to_depth_image', 'rasterize', 'read_ply', 'write_ply',
    'export_preview_png', 'read_depth_image', 'write_depth_image',
]
