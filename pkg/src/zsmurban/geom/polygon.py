"""Convex polygons, disjoint unions of them, and closed-set boolean operations.

All coordinates are meters in a local ground-plane frame. Polygons are stored
counter-clockwise and kept convex by construction: every boolean operation
normalizes its output through a convex hull pass, which also dedups vertices.
Regions (finite unions of interior-disjoint convex parts) are the currency of
the shadow-matching pipeline: shadows, the area of interest, and everything
derived from them live here.

Boundary semantics are closed throughout: intersection keeps shared edges and
subtraction keeps the cut line (closed difference), so refining a position set
never drops a boundary point.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "EPS_GEOM",
    "EPS_AREA",
    "GeometryError",
    "DegenerateRegionError",
    "EmptyRegionError",
    "ConvexPolygon",
    "RegionSet",
    "poly_intersect",
    "poly_subtract",
    "region_intersect",
    "region_subtract",
    "region_union",
    "region_extent",
    "region_contains_points",
    "region_boundary_distance",
]

# Vertex dedup / orientation tolerance (m). Scene coordinates span ~1e3 m,
# so doubles keep >6 digits of headroom below this.
EPS_GEOM = 1e-9
# Smallest representable region area (m^2); anything thinner collapses to empty.
EPS_AREA = 1e-6


class GeometryError(ValueError):
    """Invalid geometric input (bad polygon, dimension mismatch, ...)."""


class DegenerateRegionError(GeometryError):
    """A construction produced a zero-area ("degenerate region") result."""


class EmptyRegionError(GeometryError):
    """An operation that needs a nonempty region received an empty one."""


Point = tuple[float, float]


def _shoelace(verts: Sequence[Point]) -> float:
    acc = 0.0
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return 0.5 * acc


def _convex_hull(points: Iterable[Point]) -> list[Point]:
    """Andrew monotone chain; strictly convex CCW output, collinear dropped."""
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) < 3:
        return pts

    def build(seq: list[Point]) -> list[Point]:
        out: list[Point] = []
        for p in seq:
            while len(out) >= 2:
                ox, oy = out[-2]
                ax, ay = out[-1]
                if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) <= 0.0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = build(pts)
    upper = build(pts[::-1])
    return lower[:-1] + upper[:-1]


def _dedup_ring(verts: Sequence[Point], tol: float) -> list[Point]:
    out: list[Point] = []
    for p in verts:
        if out and abs(p[0] - out[-1][0]) <= tol and abs(p[1] - out[-1][1]) <= tol:
            continue
        out.append(p)
    if len(out) >= 2 and abs(out[0][0] - out[-1][0]) <= tol and abs(out[0][1] - out[-1][1]) <= tol:
        out.pop()
    return out


class ConvexPolygon:
    """Immutable convex polygon with CCW vertices.

    The validating constructor enforces the representation invariants; the
    classmethods are the normal way to build one from raw points.
    """

    __slots__ = ("vertices", "area", "bbox")

    def __init__(self, vertices: Sequence[Point], *, validate: bool = True):
        verts = tuple((float(x), float(y)) for x, y in vertices)
        if validate:
            verts = tuple(_dedup_ring(verts, EPS_GEOM))
            if len(verts) < 3:
                raise GeometryError(f"polygon needs >= 3 distinct vertices, got {len(verts)}")
            for p in verts:
                if not (math.isfinite(p[0]) and math.isfinite(p[1])):
                    raise GeometryError("polygon vertex is not finite")
            n = len(verts)
            for i in range(n):
                ax, ay = verts[i]
                bx, by = verts[(i + 1) % n]
                cx, cy = verts[(i + 2) % n]
                cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
                if cross < -EPS_GEOM:
                    raise GeometryError("polygon is not convex/counter-clockwise")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "area", _shoelace(verts))
        xs = [p[0] for p in verts]
        ys = [p[1] for p in verts]
        object.__setattr__(self, "bbox", (min(xs), min(ys), max(xs), max(ys)))

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("ConvexPolygon is immutable")

    def __repr__(self) -> str:
        return f"ConvexPolygon({len(self.vertices)} verts, area={self.area:.3g})"

    def __eq__(self, other) -> bool:
        return isinstance(other, ConvexPolygon) and self.vertices == other.vertices

    def __hash__(self) -> int:
        return hash(self.vertices)

    @classmethod
    def from_points(cls, points: Iterable[Point]) -> "ConvexPolygon":
        """Convex hull of ``points``; raises DegenerateRegionError if flat."""
        poly = _hull_polygon(points)
        if poly is None:
            raise DegenerateRegionError("degenerate region: hull has no area")
        return poly

    @classmethod
    def rectangle(cls, xmin: float, ymin: float, xmax: float, ymax: float) -> "ConvexPolygon":
        if xmax - xmin <= 0 or ymax - ymin <= 0:
            raise GeometryError("rectangle must have positive extent")
        return cls([(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)], validate=False)

    @classmethod
    def regular(cls, center: Point, radius: float, sides: int, phase: float = 0.0) -> "ConvexPolygon":
        cx, cy = center
        pts = [
            (cx + radius * math.cos(phase + 2 * math.pi * k / sides),
             cy + radius * math.sin(phase + 2 * math.pi * k / sides))
            for k in range(sides)
        ]
        return cls.from_points(pts)

    def contains(self, point: Point, band: float = EPS_GEOM) -> bool:
        """Closed containment with a ``band``-meter tolerance outward."""
        px, py = point
        verts = self.vertices
        n = len(verts)
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            dx, dy = bx - ax, by - ay
            cross = dx * (py - ay) - dy * (px - ax)
            if cross < -band * math.hypot(dx, dy):
                return False
        return True

    def translate(self, offset: Point) -> "ConvexPolygon":
        ox, oy = offset
        return ConvexPolygon([(x + ox, y + oy) for x, y in self.vertices], validate=False)

    def halfplanes(self) -> list[tuple[float, float, float]]:
        """Edges as (a, b, c) with the interior satisfying a*x + b*y <= c."""
        verts = self.vertices
        n = len(verts)
        out = []
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            dx, dy = bx - ax, by - ay
            out.append((dy, -dx, dy * ax - dx * ay))
        return out

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)


def _hull_polygon(points: Iterable[Point]) -> ConvexPolygon | None:
    """Hull of points as a polygon, or None when area < EPS_AREA."""
    hull = _convex_hull(points)
    hull = _dedup_ring(hull, EPS_GEOM)
    if len(hull) < 3 or _shoelace(hull) < EPS_AREA:
        return None
    return ConvexPolygon(hull, validate=False)


def _ring_polygon(ring: list[Point]) -> ConvexPolygon | None:
    """Normalize a clipped ring into a polygon, or None when degenerate.

    Halfplane clips of a convex CCW ring stay convex and CCW up to float
    jitter far below the validation tolerance, so the validating constructor
    is enough; hull normalization is kept as a fallback for pathological
    inputs.
    """
    if len(ring) < 3:
        return None
    try:
        poly = ConvexPolygon(ring)
    except GeometryError:
        return _hull_polygon(ring)
    return poly if poly.area >= EPS_AREA else None


def _clip_halfplane(verts: list[Point], a: float, b: float, c: float) -> list[Point]:
    """Sutherland-Hodgman clip of a ring against a*x + b*y <= c (closed)."""
    out: list[Point] = []
    n = len(verts)
    if n == 0:
        return out
    px, py = verts[-1]
    dp = a * px + b * py - c
    for q in verts:
        qx, qy = q
        dq = a * qx + b * qy - c
        if dp <= 0.0:
            out.append((px, py))
            if dq > 0.0:
                t = dp / (dp - dq)
                out.append((px + t * (qx - px), py + t * (qy - py)))
        elif dq < 0.0:
            t = dp / (dp - dq)
            out.append((px + t * (qx - px), py + t * (qy - py)))
        px, py, dp = qx, qy, dq
    return out


def _bbox_disjoint(b1, b2) -> bool:
    # Touching counts as disjoint: a shared boundary has zero area, so both
    # closed intersection (degenerate, collapses to empty) and closed
    # difference (removes nothing) are no-ops.
    return (
        b1[2] <= b2[0] + EPS_GEOM or b2[2] <= b1[0] + EPS_GEOM or
        b1[3] <= b2[1] + EPS_GEOM or b2[3] <= b1[1] + EPS_GEOM
    )


class RegionSet:
    """Finite union of interior-disjoint convex polygons (possibly empty).

    Disjointness is guaranteed by the operations that build RegionSets; the
    constructor trusts its caller. ``region_union`` re-establishes it for
    arbitrary overlapping input.
    """

    __slots__ = ("parts",)

    def __init__(self, parts: Iterable[ConvexPolygon] = ()):
        object.__setattr__(self, "parts", tuple(parts))

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("RegionSet is immutable")

    def __repr__(self) -> str:
        return f"RegionSet({len(self.parts)} parts, area={self.area:.3g})"

    @classmethod
    def empty(cls) -> "RegionSet":
        return cls(())

    @classmethod
    def from_polygon(cls, poly: ConvexPolygon) -> "RegionSet":
        return cls((poly,))

    @property
    def area(self) -> float:
        return sum(p.area for p in self.parts)

    @property
    def is_empty(self) -> bool:
        return not self.parts

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        if not self.parts:
            raise EmptyRegionError("empty region has no bounding box")
        boxes = [p.bbox for p in self.parts]
        return (
            min(b[0] for b in boxes),
            min(b[1] for b in boxes),
            max(b[2] for b in boxes),
            max(b[3] for b in boxes),
        )

    def contains(self, point: Point, band: float = EPS_GEOM) -> bool:
        return any(p.contains(point, band) for p in self.parts)

    def translate(self, offset: Point) -> "RegionSet":
        return RegionSet(p.translate(offset) for p in self.parts)


def poly_intersect(a: ConvexPolygon, b: ConvexPolygon) -> RegionSet:
    """Intersection of two convex polygons: zero or one convex part."""
    if _bbox_disjoint(a.bbox, b.bbox):
        return RegionSet.empty()
    ring = list(a.vertices)
    for ha, hb, hc in b.halfplanes():
        ring = _clip_halfplane(ring, ha, hb, hc)
        if len(ring) < 3:
            return RegionSet.empty()
    poly = _ring_polygon(ring)
    return RegionSet.empty() if poly is None else RegionSet.from_polygon(poly)


def poly_subtract(a: ConvexPolygon, b: ConvexPolygon) -> RegionSet:
    """Closed difference ``a \\ b`` as disjoint convex pieces.

    Clips ``a`` successively against each supporting halfplane of ``b``,
    emitting the outside piece at every step; what survives all clips is
    ``a & b`` and is discarded. The cut boundary stays with the pieces.
    """
    if _bbox_disjoint(a.bbox, b.bbox):
        return RegionSet.from_polygon(a)
    pieces: list[ConvexPolygon] = []
    rest = list(a.vertices)
    for ha, hb, hc in b.halfplanes():
        outside = _clip_halfplane(rest, -ha, -hb, -hc)
        if len(outside) >= 3:
            poly = _ring_polygon(outside)
            if poly is not None:
                pieces.append(poly)
        rest = _clip_halfplane(rest, ha, hb, hc)
        if len(rest) < 3:
            break
    return RegionSet(pieces)


def region_intersect(region: RegionSet, other: RegionSet) -> RegionSet:
    """Intersection of two disjoint-part regions (still disjoint)."""
    if region.is_empty or other.is_empty:
        return RegionSet.empty()
    parts: list[ConvexPolygon] = []
    for p in region.parts:
        pb = p.bbox
        for q in other.parts:
            if _bbox_disjoint(pb, q.bbox):
                continue
            parts.extend(poly_intersect(p, q).parts)
    return RegionSet(parts)


def region_subtract(region: RegionSet, other: RegionSet) -> RegionSet:
    """Closed difference ``region \\ other``; parts stay disjoint."""
    if region.is_empty or other.is_empty:
        return region
    parts: list[ConvexPolygon] = []
    for p in region.parts:
        frags = [p]
        for q in other.parts:
            qb = q.bbox
            next_frags: list[ConvexPolygon] = []
            for f in frags:
                if _bbox_disjoint(f.bbox, qb):
                    next_frags.append(f)
                else:
                    next_frags.extend(poly_subtract(f, q).parts)
            frags = next_frags
            if not frags:
                break
        parts.extend(frags)
    return RegionSet(parts)


def region_union(polys: Iterable[ConvexPolygon]) -> RegionSet:
    """Union of arbitrary (possibly overlapping) convex polygons.

    Each polygon contributes only the part not already covered, so the result
    is a disjoint decomposition. Input is processed in x-sorted order, which
    keeps the fragment count down for street-aligned geometry.
    """
    parts: list[ConvexPolygon] = []
    for p in sorted(polys, key=lambda q: (q.bbox[0], q.bbox[1], q.bbox[2], q.bbox[3])):
        frags = [p]
        for q in parts:
            qb = q.bbox
            next_frags: list[ConvexPolygon] = []
            for f in frags:
                if _bbox_disjoint(f.bbox, qb):
                    next_frags.append(f)
                else:
                    next_frags.extend(poly_subtract(f, q).parts)
            frags = next_frags
            if not frags:
                break
        parts.extend(frags)
    return RegionSet(parts)


def region_extent(region: RegionSet, direction: Point) -> float:
    """Width of the region along a unit direction (the position bound, m)."""
    dx, dy = float(direction[0]), float(direction[1])
    norm = math.hypot(dx, dy)
    if abs(norm - 1.0) > EPS_GEOM:
        raise GeometryError(f"direction must be normalized, |d| = {norm!r}")
    if region.is_empty:
        raise EmptyRegionError("no-position: extent of an empty region is undefined")
    lo = math.inf
    hi = -math.inf
    for part in region.parts:
        for x, y in part.vertices:
            s = x * dx + y * dy
            lo = min(lo, s)
            hi = max(hi, s)
    return hi - lo


def region_contains_points(region: RegionSet, points: np.ndarray, band: float = EPS_GEOM) -> np.ndarray:
    """Vectorized closed membership test for an (n, 2) array of points."""
    pts = np.asarray(points, dtype=float)
    inside = np.zeros(len(pts), dtype=bool)
    for part in region.parts:
        todo = ~inside
        if not todo.any():
            break
        sub = pts[todo]
        ok = np.ones(len(sub), dtype=bool)
        for a, b, c in part.halfplanes():
            scale = math.hypot(a, b)
            ok &= (a * sub[:, 0] + b * sub[:, 1] - c) <= band * scale
            if not ok.any():
                break
        inside[todo] = ok
    return inside


def region_boundary_distance(region: RegionSet, points: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest part boundary (inf if empty)."""
    pts = np.asarray(points, dtype=float)
    dist = np.full(len(pts), np.inf)
    for part in region.parts:
        verts = part.as_array()
        n = len(verts)
        for i in range(n):
            a = verts[i]
            b = verts[(i + 1) % n]
            ab = b - a
            denom = float(ab @ ab)
            t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
            proj = a + t[:, None] * ab
            d = np.hypot(pts[:, 0] - proj[:, 0], pts[:, 1] - proj[:, 1])
            np.minimum(dist, d, out=dist)
    return dist
