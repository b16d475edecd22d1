"""Set-based geometric substrate: constrained zonotopes, convex polygons,
disjoint regions, and the boolean operations the shadow-matching pipeline
refines position sets with.
"""

from .polygon import (
    EPS_AREA,
    EPS_GEOM,
    ConvexPolygon,
    DegenerateRegionError,
    EmptyRegionError,
    GeometryError,
    RegionSet,
    poly_intersect,
    poly_subtract,
    region_boundary_distance,
    region_contains_points,
    region_extent,
    region_intersect,
    region_subtract,
    region_union,
)
from .simplex import LinearProgramError, solve_standard_form
from .zonotope import (
    EPS_LP,
    ConstrainedZonotope,
    cz_contains_point,
    cz_intersect,
    cz_is_empty,
    cz_linear_map,
    cz_sample,
    cz_support,
    cz_to_polygon,
)

__all__ = [
    "EPS_AREA",
    "EPS_GEOM",
    "EPS_LP",
    "ConstrainedZonotope",
    "ConvexPolygon",
    "DegenerateRegionError",
    "EmptyRegionError",
    "GeometryError",
    "LinearProgramError",
    "RegionSet",
    "cz_contains_point",
    "cz_intersect",
    "cz_is_empty",
    "cz_linear_map",
    "cz_sample",
    "cz_support",
    "cz_to_polygon",
    "poly_intersect",
    "poly_subtract",
    "region_boundary_distance",
    "region_contains_points",
    "region_extent",
    "region_intersect",
    "region_subtract",
    "region_union",
    "solve_standard_form",
]
