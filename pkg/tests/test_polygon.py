import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zsmurban.geom import (
    EPS_AREA,
    ConvexPolygon,
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

UNIT = ConvexPolygon.rectangle(0.0, 0.0, 1.0, 1.0)


def random_convex(rng, center=(0.0, 0.0), radius=5.0, max_verts=9):
    """Random convex polygon: hull of points on a noisy circle."""
    k = int(rng.integers(3, max_verts + 1))
    angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, size=k))
    radii = rng.uniform(0.3 * radius, radius, size=k)
    pts = [(center[0] + r * math.cos(a), center[1] + r * math.sin(a))
           for a, r in zip(angles, radii)]
    return ConvexPolygon.from_points(pts)


def grid_points(bbox, n_side):
    xs = np.linspace(bbox[0], bbox[2], n_side)
    ys = np.linspace(bbox[1], bbox[3], n_side)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


class TestConvexPolygon:
    def test_validation_rejects_concave(self):
        with pytest.raises(GeometryError):
            ConvexPolygon([(0, 0), (2, 0), (1, 0.5), (2, 2), (0, 2)])

    def test_validation_rejects_too_few(self):
        with pytest.raises(GeometryError):
            ConvexPolygon([(0, 0), (1, 1)])

    def test_dedup_consecutive(self):
        poly = ConvexPolygon([(0, 0), (0, 0), (1, 0), (1, 1), (0, 1)])
        assert len(poly.vertices) == 4

    def test_area_and_bbox(self):
        assert UNIT.area == pytest.approx(1.0)
        assert UNIT.bbox == (0.0, 0.0, 1.0, 1.0)

    def test_contains_is_closed(self):
        assert UNIT.contains((0.0, 0.5))
        assert UNIT.contains((0.5, 0.5))
        assert not UNIT.contains((1.5, 0.5))


class TestPolyIntersect:
    def test_idempotent(self):
        result = poly_intersect(UNIT, UNIT)
        assert len(result.parts) == 1
        assert result.area == pytest.approx(UNIT.area, abs=EPS_AREA)

    def test_offset_squares(self):
        other = ConvexPolygon.rectangle(0.5, 0.0, 1.5, 1.0)
        result = poly_intersect(UNIT, other)
        assert result.area == pytest.approx(0.5, abs=EPS_AREA)

    def test_disjoint_is_empty(self):
        far = ConvexPolygon.rectangle(10.0, 10.0, 11.0, 11.0)
        assert poly_intersect(UNIT, far).is_empty

    def test_sub_area_sliver_collapses_to_empty(self):
        # Overlap thinner than the representable-area floor is not a region.
        sliver = ConvexPolygon.rectangle(1.0 - 5e-7, 0.0, 2.0, 1.0)
        assert poly_intersect(UNIT, sliver).is_empty

    def test_edge_touching_is_empty(self):
        adjacent = ConvexPolygon.rectangle(1.0, 0.0, 2.0, 1.0)
        assert poly_intersect(UNIT, adjacent).is_empty
        assert poly_subtract(UNIT, adjacent).area == pytest.approx(1.0, abs=EPS_AREA)

    def test_grid_oracle_random_pairs(self, rng):
        # Membership of the intersection must equal AND of the inputs on a
        # dense grid, away from the edges.
        for _ in range(40):
            a = random_convex(rng, center=rng.uniform(-2, 2, 2))
            b = random_convex(rng, center=rng.uniform(-2, 2, 2))
            result = poly_intersect(a, b)
            bbox = (min(a.bbox[0], b.bbox[0]), min(a.bbox[1], b.bbox[1]),
                    max(a.bbox[2], b.bbox[2]), max(a.bbox[3], b.bbox[3]))
            pts = grid_points(bbox, 40)
            in_a = region_contains_points(RegionSet.from_polygon(a), pts)
            in_b = region_contains_points(RegionSet.from_polygon(b), pts)
            got = region_contains_points(result, pts)
            margin = np.minimum(region_boundary_distance(RegionSet.from_polygon(a), pts),
                                region_boundary_distance(RegionSet.from_polygon(b), pts))
            keep = margin > 1e-9
            assert (got[keep] == (in_a & in_b)[keep]).mean() >= 0.999


class TestPolySubtract:
    def test_self_subtraction_empty(self):
        assert poly_subtract(UNIT, UNIT).is_empty

    def test_disjoint_noop(self):
        far = ConvexPolygon.rectangle(5.0, 5.0, 6.0, 6.0)
        result = poly_subtract(UNIT, far)
        assert result.area == pytest.approx(1.0, abs=EPS_AREA)

    def test_partition_identity_random_pairs(self, rng):
        for _ in range(40):
            a = random_convex(rng, center=rng.uniform(-2, 2, 2))
            b = random_convex(rng, center=rng.uniform(-2, 2, 2))
            inter = poly_intersect(a, b)
            diff = poly_subtract(a, b)
            assert inter.area + diff.area == pytest.approx(a.area, rel=1e-6, abs=EPS_AREA)

    def test_membership_oracle(self, rng):
        for _ in range(25):
            a = random_convex(rng)
            b = random_convex(rng, center=rng.uniform(-3, 3, 2))
            diff = poly_subtract(a, b)
            pts = grid_points(a.bbox, 35)
            in_a = region_contains_points(RegionSet.from_polygon(a), pts)
            in_b = region_contains_points(RegionSet.from_polygon(b), pts)
            got = region_contains_points(diff, pts)
            margin = np.minimum(region_boundary_distance(RegionSet.from_polygon(a), pts),
                                region_boundary_distance(RegionSet.from_polygon(b), pts))
            keep = margin > 1e-9
            assert (got[keep] == (in_a & ~in_b)[keep]).mean() >= 0.999

    def test_result_parts_are_disjoint(self, rng):
        for _ in range(20):
            a = random_convex(rng)
            b = random_convex(rng, center=rng.uniform(-1, 1, 2))
            diff = poly_subtract(a, b)
            overlap = 0.0
            for i, p in enumerate(diff.parts):
                for q in diff.parts[i + 1:]:
                    overlap += poly_intersect(p, q).area
            assert overlap < EPS_AREA


class TestRegionOps:
    def test_union_of_overlapping_squares(self):
        other = ConvexPolygon.rectangle(0.5, 0.0, 1.5, 1.0)
        union = region_union([UNIT, other])
        assert union.area == pytest.approx(1.5, abs=1e-9)

    def test_union_parts_disjoint(self, rng):
        polys = [random_convex(rng, center=rng.uniform(-4, 4, 2), radius=3.0)
                 for _ in range(8)]
        union = region_union(polys)
        overlap = 0.0
        for i, p in enumerate(union.parts):
            for q in union.parts[i + 1:]:
                overlap += poly_intersect(p, q).area
        assert overlap < EPS_AREA
        pts = grid_points(union.bbox, 50)
        direct = np.zeros(len(pts), dtype=bool)
        for poly in polys:
            direct |= region_contains_points(RegionSet.from_polygon(poly), pts)
        got = region_contains_points(union, pts)
        margin = region_boundary_distance(union, pts)
        keep = margin > 1e-9
        assert (got[keep] == direct[keep]).mean() >= 0.999

    def test_region_intersect_and_subtract_disjointness(self, rng):
        r1 = region_union([random_convex(rng, center=rng.uniform(-2, 2, 2)) for _ in range(4)])
        r2 = region_union([random_convex(rng, center=rng.uniform(-2, 2, 2)) for _ in range(4)])
        for region in (region_intersect(r1, r2), region_subtract(r1, r2)):
            overlap = 0.0
            for i, p in enumerate(region.parts):
                for q in region.parts[i + 1:]:
                    overlap += poly_intersect(p, q).area
            assert overlap < EPS_AREA


class TestRegionExtent:
    def test_unit_square_axis(self):
        region = RegionSet.from_polygon(UNIT)
        assert region_extent(region, (1.0, 0.0)) == pytest.approx(1.0)

    def test_unit_square_diagonal(self):
        region = RegionSet.from_polygon(UNIT)
        d = (math.sqrt(0.5), math.sqrt(0.5))
        assert region_extent(region, d) == pytest.approx(math.sqrt(2.0))

    def test_empty_region_raises_no_position(self):
        with pytest.raises(EmptyRegionError):
            region_extent(RegionSet.empty(), (1.0, 0.0))

    def test_unnormalized_direction_rejected(self):
        with pytest.raises(GeometryError):
            region_extent(RegionSet.from_polygon(UNIT), (2.0, 0.0))

    def test_extent_matches_sampled_members(self, rng):
        # Sampling oracle: extent of many member points approaches the
        # vertex-based extent from below.
        region = region_union([random_convex(rng, center=rng.uniform(-3, 3, 2))
                               for _ in range(3)])
        bbox = region.bbox
        pts = np.column_stack([
            rng.uniform(bbox[0], bbox[2], 100_000),
            rng.uniform(bbox[1], bbox[3], 100_000),
        ])
        inside = pts[region_contains_points(region, pts)]
        angle = rng.uniform(0, 2 * math.pi)
        d = (math.cos(angle), math.sin(angle))
        proj = inside @ np.array(d)
        sampled = proj.max() - proj.min()
        exact = region_extent(region, d)
        assert sampled <= exact + 1e-9
        assert sampled == pytest.approx(exact, rel=0.01)

    @settings(max_examples=30, deadline=None)
    @given(
        dx=st.floats(-50, 50), dy=st.floats(-50, 50),
        angle=st.floats(0, 2 * math.pi),
    )
    def test_translation_invariance_and_rotation_equivariance(self, dx, dy, angle):
        rng = np.random.default_rng(99)
        region = region_union([random_convex(rng, center=(1.0, -2.0)),
                               random_convex(rng, center=(4.0, 2.0))])
        d = (math.cos(angle), math.sin(angle))
        base = region_extent(region, d)
        shifted = region_extent(region.translate((dx, dy)), d)
        assert shifted == pytest.approx(base, rel=1e-9, abs=1e-7)
        # Rotating the region and the direction together leaves extent alone.
        c, s = math.cos(angle), math.sin(angle)
        rotated_parts = [
            ConvexPolygon([(c * x - s * y, s * x + c * y) for x, y in p.vertices])
            for p in region.parts
        ]
        rotated = RegionSet(rotated_parts)
        d0 = (1.0, 0.0)
        d_rot = (c, s)
        assert region_extent(rotated, d_rot) == pytest.approx(
            region_extent(region, d0), rel=1e-9, abs=1e-7)
