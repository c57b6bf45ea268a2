"""Geometric primitives, projections, Minkowski differences and signed distance fields."""

from .minkowski import CSpaceRows, MinkowskiDiff, cspace_halfspaces, minkowski_diff, polytope_clearance
from .polytope import (
    ConvexPolytope,
    Segment,
    boundary_closest,
    contains,
    convex_hull,
    inflate,
    penetration,
    project_hyperplane,
    project_onto_polytope,
    project_onto_polytope_boundary,
    project_out_of_polytope,
    project_segment,
    rotation,
    signed_distance_polytope,
)
from .sdf import (
    CircleSdf,
    SdfShape,
    SplineSdf,
    ellipse_field,
    heart_field,
    point_in_polygon,
    sampled_boundary_field,
    sdf_gradient,
    signed_distance,
)

__all__ = [
    "CSpaceRows",
    "CircleSdf",
    "ConvexPolytope",
    "MinkowskiDiff",
    "SdfShape",
    "Segment",
    "SplineSdf",
    "boundary_closest",
    "contains",
    "convex_hull",
    "cspace_halfspaces",
    "ellipse_field",
    "heart_field",
    "inflate",
    "minkowski_diff",
    "penetration",
    "point_in_polygon",
    "polytope_clearance",
    "project_hyperplane",
    "project_onto_polytope",
    "project_onto_polytope_boundary",
    "project_out_of_polytope",
    "project_segment",
    "rotation",
    "sampled_boundary_field",
    "sdf_gradient",
    "signed_distance",
    "signed_distance_polytope",
]
