"""Zonotope shadow matching on the ground plane.

For each satellite the shadow is the set of antenna-height positions whose
ray to that satellite is blocked by some building. A building of height h
shadows the Minkowski sum of its footprint with the horizontal ray segment of
length (h - antenna) / tan(elevation) pointing away from the satellite; for a
convex footprint that is exactly the convex hull of the footprint and its
translate. Refinement walks the selected satellites: LOS subtracts the
shadow from the area of interest, NLOS intersects with it, and an epoch is
scored on whether anything is left and whether the truth is inside.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .geom import (
    EPS_GEOM,
    ConvexPolygon,
    GeometryError,
    RegionSet,
    poly_intersect,
    region_boundary_distance,
    region_intersect,
    region_subtract,
    region_union,
)
from .scene import NLOS, Building, SatelliteView, Scene
from .selection import SelectionDecision

__all__ = [
    "GrazingSatelliteWarning",
    "ShadowRegion",
    "RefinementStep",
    "AOI",
    "PositioningOutcome",
    "compute_shadow",
    "building_shadow_polygon",
    "refine_aoi",
    "score_epoch",
    "truth_near_shadow_boundary",
]

_GRAZING_ELEVATION_DEG = 1e-6


class GrazingSatelliteWarning(UserWarning):
    """Elevation near zero: the unclipped shadow is unbounded."""


@dataclass(frozen=True)
class ShadowRegion:
    sat_id: str
    region: RegionSet


@dataclass(frozen=True)
class RefinementStep:
    sat_id: str
    label: str
    operation: str          # "subtract" | "intersect" | "skipped"
    resulting_area: float


@dataclass(frozen=True)
class AOI:
    region: RegionSet
    refinement_log: tuple[RefinementStep, ...] = ()
    no_refinement: bool = False


@dataclass(frozen=True)
class PositioningOutcome:
    epoch_index: int
    success: bool
    contains_truth: bool
    cross_street_bound: float | None
    along_street_bound: float | None
    satellites_used: int
    misclassified_used: int
    no_refinement: bool = False
    boundary_ambiguous: bool = False


def building_shadow_polygon(building: Building, azimuth_deg: float, elevation_deg: float,
                            antenna_height: float) -> ConvexPolygon | None:
    """Shadow of one building at antenna height, or None if it casts none."""
    if building.height <= antenna_height:
        return None
    el = math.radians(elevation_deg)
    reach = (building.height - antenna_height) / math.tan(el)
    az = math.radians(azimuth_deg)
    off = (-reach * math.sin(az), -reach * math.cos(az))
    verts = list(building.footprint.vertices)
    verts += [(x + off[0], y + off[1]) for x, y in verts]
    return ConvexPolygon.from_points(verts)


def compute_shadow(scene: Scene, sat: SatelliteView, antenna_height: float,
                   clip_bounds: tuple[float, float, float, float] | None = None) -> ShadowRegion:
    """Ground shadow of the whole scene for one satellite, clipped to bounds.

    Within the clip rectangle, membership in the returned region is
    equivalent to the blocked-ray test at antenna height. Defaults to the
    scene bounds; a tighter rectangle (e.g. the street corridor) gives the
    same refinement results faster because the area of interest never leaves
    it.
    """
    if sat.elevation_deg <= 0.0:
        raise GeometryError(f"satellite {sat.sat_id} below horizon (elevation <= 0)")
    if sat.elevation_deg <= _GRAZING_ELEVATION_DEG:
        warnings.warn(
            f"grazing satellite {sat.sat_id}: shadow unbounded, returning clipped shadow",
            GrazingSatelliteWarning,
        )
    bounds = scene.bounds if clip_bounds is None else clip_bounds
    clip_rect = ConvexPolygon.rectangle(*bounds)
    pieces = []
    for building in scene.buildings:
        poly = building_shadow_polygon(building, sat.azimuth_deg, sat.elevation_deg, antenna_height)
        if poly is None:
            continue
        clipped = poly_intersect(poly, clip_rect)
        pieces.extend(clipped.parts)
    return ShadowRegion(sat_id=sat.sat_id, region=region_union(pieces))


def refine_aoi(initial: AOI, decisions: Sequence[SelectionDecision],
               shadows: Mapping[str, ShadowRegion]) -> AOI:
    """Apply every selected decision in ascending satellite id.

    LOS removes the shadow from the region, NLOS keeps only the shadow.
    Refinement stops early once the region empties; the remaining steps are
    logged as skipped. An empty result is a legitimate, reportable outcome.
    """
    selected = sorted((d for d in decisions if d.selected), key=lambda d: d.sat_id)
    if not selected:
        return AOI(region=initial.region, refinement_log=initial.refinement_log,
                   no_refinement=True)
    region = initial.region
    log = list(initial.refinement_log)
    for pos, decision in enumerate(selected):
        if region.is_empty:
            log.extend(
                RefinementStep(d.sat_id, d.agreed_label or "", "skipped", 0.0)
                for d in selected[pos:]
            )
            break
        shadow = shadows[decision.sat_id]
        if decision.agreed_label == NLOS:
            region = region_intersect(region, shadow.region)
            op = "intersect"
        else:
            region = region_subtract(region, shadow.region)
            op = "subtract"
        log.append(RefinementStep(decision.sat_id, decision.agreed_label or "", op, region.area))
    return AOI(region=region, refinement_log=tuple(log), no_refinement=False)


def score_epoch(aoi: AOI, truth: tuple[float, float], street_direction: tuple[float, float],
                *, epoch_index: int = -1, satellites_used: int = 0,
                misclassified_used: int = 0, boundary_ambiguous: bool = False) -> PositioningOutcome:
    """Per-epoch verdict: success (nonempty), containment, and the position
    bounds along / across the street. Bounds stay absent for failed epochs.
    """
    dx, dy = street_direction
    norm = math.hypot(dx, dy)
    if abs(norm - 1.0) > EPS_GEOM:
        raise GeometryError("street direction must be a unit vector")
    if aoi.region.is_empty:
        return PositioningOutcome(
            epoch_index=epoch_index, success=False, contains_truth=False,
            cross_street_bound=None, along_street_bound=None,
            satellites_used=satellites_used, misclassified_used=misclassified_used,
            no_refinement=aoi.no_refinement, boundary_ambiguous=boundary_ambiguous)
    along = _extent(aoi.region, (dx, dy))
    cross = _extent(aoi.region, (-dy, dx))
    return PositioningOutcome(
        epoch_index=epoch_index, success=True,
        contains_truth=aoi.region.contains(truth, EPS_GEOM),
        cross_street_bound=cross, along_street_bound=along,
        satellites_used=satellites_used, misclassified_used=misclassified_used,
        no_refinement=aoi.no_refinement, boundary_ambiguous=boundary_ambiguous)


def _extent(region: RegionSet, direction: tuple[float, float]) -> float:
    lo = math.inf
    hi = -math.inf
    for part in region.parts:
        for x, y in part.vertices:
            s = x * direction[0] + y * direction[1]
            lo = min(lo, s)
            hi = max(hi, s)
    return hi - lo


def truth_near_shadow_boundary(shadows: Sequence[ShadowRegion], truth: tuple[float, float],
                               band: float = EPS_GEOM) -> bool:
    """Flag positions within ``band`` of any used shadow's boundary; such
    epochs are excluded from containment-soundness assertions only.
    """
    pt = np.asarray([truth], dtype=float)
    for shadow in shadows:
        if shadow.region.is_empty:
            continue
        if float(region_boundary_distance(shadow.region, pt)[0]) < band:
            return True
    return False
