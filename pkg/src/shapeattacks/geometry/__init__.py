"""Spatial indexing, surface estimation, sampling, projection and distances."""

from .delaunay import (
    DegenerateInputError,
    EmptyBoundaryError,
    alpha_shape,
    alpha_tets,
    boundary_faces,
    circumspheres,
    default_alpha,
    delaunay_3d,
    estimate_surface,
    signed_volumes,
)
from .distances import chamfer_distance, chamfer_gradient, mean_nn_distance, nearest_neighbors
from .mesh import (
    TriangleIndex,
    TriangleMesh,
    build_triangle_index,
    closest_points_on_triangles,
    hausdorff_to_surface,
    project_to_surface,
    surface_distance,
)
from .sampling import farthest_point_sample, sample_on_mesh
from .vptree import VPTree, k_nearest
from .vptree import build_index as _build_point_index


def build_index(data):
    """VP-tree over a point set, or a triangle index when given a ``TriangleMesh``."""
    if isinstance(data, TriangleMesh):
        return TriangleIndex(data)
    return _build_point_index(data)


__all__ = [
    "DegenerateInputError",
    "EmptyBoundaryError",
    "TriangleIndex",
    "TriangleMesh",
    "VPTree",
    "alpha_shape",
    "alpha_tets",
    "boundary_faces",
    "build_index",
    "build_triangle_index",
    "chamfer_distance",
    "chamfer_gradient",
    "circumspheres",
    "closest_points_on_triangles",
    "default_alpha",
    "delaunay_3d",
    "estimate_surface",
    "farthest_point_sample",
    "hausdorff_to_surface",
    "k_nearest",
    "mean_nn_distance",
    "nearest_neighbors",
    "project_to_surface",
    "sample_on_mesh",
    "signed_volumes",
]
