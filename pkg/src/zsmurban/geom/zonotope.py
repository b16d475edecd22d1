"""Constrained zonotopes and their set algebra.

A constrained zonotope is the set ``{c + G xi : ||xi||_inf <= 1, A xi = b}``.
The family is closed under linear maps and intersections, which makes it a
convenient exact carrier for position sets before they are flattened to
ground-plane polygons. Emptiness and membership reduce to small feasibility
LPs solved by the in-package simplex.
"""

from __future__ import annotations

import math

import numpy as np

from .polygon import (
    EPS_AREA,
    EPS_GEOM,
    ConvexPolygon,
    DegenerateRegionError,
    EmptyRegionError,
    GeometryError,
    _convex_hull,
)
from .simplex import solve_standard_form

__all__ = [
    "EPS_LP",
    "ConstrainedZonotope",
    "cz_linear_map",
    "cz_intersect",
    "cz_is_empty",
    "cz_contains_point",
    "cz_support",
    "cz_to_polygon",
    "cz_sample",
]

# Feasibility slack for the emptiness/membership LPs (rows are normalized
# inside the solver, so this acts as a relative tolerance).
EPS_LP = 1e-8


class ConstrainedZonotope:
    """Immutable value: center ``c`` (n,), generators ``G`` (n, ng),
    constraints ``A`` (nc, ng), ``b`` (nc,), with nc <= ng and finite entries.
    """

    __slots__ = ("center", "generators", "con_a", "con_b")

    def __init__(self, center, generators, con_a=None, con_b=None):
        c = np.atleast_1d(np.asarray(center, dtype=float))
        g = np.asarray(generators, dtype=float)
        if g.ndim == 1:
            g = g.reshape(len(c), -1) if g.size else g.reshape(len(c), 0)
        n = c.shape[0]
        ng = g.shape[1]
        if g.shape[0] != n:
            raise GeometryError(f"generator rows {g.shape[0]} != dimension {n}")
        if con_a is None:
            a = np.zeros((0, ng))
        else:
            a = np.asarray(con_a, dtype=float)
            if a.ndim == 1:
                a = a.reshape(1, -1) if a.size else np.zeros((0, ng))
            if a.ndim != 2 or a.shape[1] != ng:
                raise GeometryError(f"constraint matrix {a.shape} does not match ng={ng}")
        b = np.zeros(0) if con_b is None else np.atleast_1d(np.asarray(con_b, dtype=float))
        if a.shape[0] != b.shape[0]:
            raise GeometryError(f"constraint rows {a.shape[0]} != rhs length {b.shape[0]}")
        if a.shape[0] > ng:
            raise GeometryError(f"nc={a.shape[0]} exceeds ng={ng}")
        for arr in (c, g, a, b):
            if arr.size and not np.isfinite(arr).all():
                raise GeometryError("constrained zonotope entries must be finite")
        for name, arr in (("center", c), ("generators", g), ("con_a", a), ("con_b", b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("ConstrainedZonotope is immutable")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def n_generators(self) -> int:
        return self.generators.shape[1]

    @property
    def n_constraints(self) -> int:
        return self.con_a.shape[0]

    def __repr__(self) -> str:
        return f"ConstrainedZonotope(n={self.dim}, ng={self.n_generators}, nc={self.n_constraints})"

    @classmethod
    def box(cls, center, half_widths) -> "ConstrainedZonotope":
        """Axis-aligned box: one generator per axis."""
        c = np.asarray(center, dtype=float)
        h = np.asarray(half_widths, dtype=float)
        return cls(c, np.diag(h))


def _canonical_empty(dim: int) -> ConstrainedZonotope:
    # 0 * xi = 2 is infeasible on the unit box; keeps nc <= ng representable.
    return ConstrainedZonotope(np.zeros(dim), np.zeros((dim, 1)), np.zeros((1, 1)), np.array([2.0]))


def _reduce_constraints(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Drop linearly dependent constraint rows; None means provably empty.

    Gaussian elimination with partial pivoting on [A | b]; a zero row with a
    nonzero rhs certifies infeasibility of ``A xi = b`` regardless of the box.
    """
    m, ng = a.shape
    work = np.hstack([a, b[:, None]]).astype(float)
    scale = max(1.0, np.abs(work).max(initial=0.0))
    tol = 1e-11 * scale
    rank_rows: list[np.ndarray] = []
    col = 0
    rows_left = list(range(m))
    while rows_left and col < ng:
        pivot_row = max(rows_left, key=lambda r: abs(work[r, col]))
        if abs(work[pivot_row, col]) <= tol:
            col += 1
            continue
        rank_rows.append(work[pivot_row].copy())
        rows_left.remove(pivot_row)
        for r in rows_left:
            factor = work[r, col] / work[pivot_row, col]
            work[r] -= factor * work[pivot_row]
        col += 1
    for r in rows_left:
        if abs(work[r, ng]) > max(tol, EPS_LP * scale):
            return None  # 0 = nonzero: empty set
    if not rank_rows:
        return np.zeros((0, ng)), np.zeros(0)
    kept = np.array(rank_rows)
    return kept[:, :ng], kept[:, ng]


def _box_lp(a: np.ndarray, b: np.ndarray, cost_xi: np.ndarray | None):
    """Feasibility / optimization of ``A xi = b`` over the unit box.

    Substitutes ``xi = x - 1`` with ``x in [0, 2]`` to reach simplex standard
    form. Returns (feasible, xi, objective-in-xi-terms).
    """
    nc, ng = a.shape
    top = np.hstack([a, np.zeros((nc, ng))])
    bot = np.hstack([np.eye(ng), np.eye(ng)])
    a_eq = np.vstack([top, bot])
    b_eq = np.concatenate([b + a.sum(axis=1), np.full(ng, 2.0)])
    cost = None if cost_xi is None else np.concatenate([cost_xi, np.zeros(ng)])
    feasible, x, obj = solve_standard_form(a_eq, b_eq, cost, feas_tol=EPS_LP)
    if not feasible:
        return False, None, obj
    xi = x[:ng] - 1.0
    return True, xi, obj


def cz_linear_map(matrix, z: ConstrainedZonotope) -> ConstrainedZonotope:
    """Image of ``z`` under a linear map: {M x : x in z}."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if m.shape[1] != z.dim:
        raise GeometryError(f"map expects {m.shape[1]} columns, zonotope has dim {z.dim}")
    return ConstrainedZonotope(m @ z.center, m @ z.generators, z.con_a, z.con_b)


def cz_intersect(z1: ConstrainedZonotope, z2: ConstrainedZonotope) -> ConstrainedZonotope:
    """Exact intersection by generator/constraint stacking.

    A point is in the result iff it is in both inputs. When the stacked
    constraint count exceeds the generator count, redundant rows are removed;
    an inconsistency detected during that reduction yields a canonical empty
    set in the same ambient dimension.
    """
    if z1.dim != z2.dim:
        raise GeometryError(f"dimension mismatch: {z1.dim} vs {z2.dim}")
    n = z1.dim
    ng1, ng2 = z1.n_generators, z2.n_generators
    ng = ng1 + ng2
    gens = np.hstack([z1.generators, np.zeros((n, ng2))])
    a = np.zeros((z1.n_constraints + z2.n_constraints + n, ng))
    a[: z1.n_constraints, :ng1] = z1.con_a
    a[z1.n_constraints : z1.n_constraints + z2.n_constraints, ng1:] = z2.con_a
    a[z1.n_constraints + z2.n_constraints :, :ng1] = z1.generators
    a[z1.n_constraints + z2.n_constraints :, ng1:] = -z2.generators
    b = np.concatenate([z1.con_b, z2.con_b, z2.center - z1.center])
    if a.shape[0] > ng:
        reduced = _reduce_constraints(a, b)
        if reduced is None:
            return _canonical_empty(n)
        a, b = reduced
        if a.shape[0] > ng:
            return _canonical_empty(n)  # still overdetermined => no box solution
    return ConstrainedZonotope(z1.center, gens, a, b)


def cz_is_empty(z: ConstrainedZonotope) -> bool:
    """True iff no ``xi`` in the unit box satisfies the constraints."""
    if z.n_constraints == 0:
        return False  # xi = 0 is always admissible
    feasible, _, _ = _box_lp(z.con_a, z.con_b, None)
    return not feasible


def cz_contains_point(z: ConstrainedZonotope, point) -> bool:
    """Membership test: exists xi in the box with A xi = b and c + G xi = p."""
    p = np.atleast_1d(np.asarray(point, dtype=float))
    if p.shape[0] != z.dim:
        raise GeometryError(f"point dim {p.shape[0]} != zonotope dim {z.dim}")
    if z.n_generators == 0:
        return bool(np.abs(p - z.center).max(initial=0.0) <= 1e-9)
    a = np.vstack([z.con_a, z.generators])
    b = np.concatenate([z.con_b, p - z.center])
    feasible, _, _ = _box_lp(a, b, None)
    return feasible


def cz_support(z: ConstrainedZonotope, direction) -> tuple[float, np.ndarray]:
    """Support value and a maximizer of <d, x> over the set."""
    d = np.atleast_1d(np.asarray(direction, dtype=float))
    if d.shape[0] != z.dim:
        raise GeometryError("support direction dimension mismatch")
    gd = z.generators.T @ d
    if z.n_constraints == 0:
        xi = np.sign(gd)
        point = z.center + z.generators @ xi
        return float(d @ point), point
    feasible, xi, _ = _box_lp(z.con_a, z.con_b, -gd)
    if not feasible:
        raise EmptyRegionError("support of an empty constrained zonotope")
    point = z.center + z.generators @ xi
    return float(d @ point), point


def cz_to_polygon(z: ConstrainedZonotope) -> ConvexPolygon:
    """Exact planar polygon of a 2D constrained zonotope.

    Sweeps support directions adaptively: starting from eight compass
    directions, every hull edge normal is queried and any support point that
    extends past the current hull is inserted, until all edges are certified.
    Since the set is a polytope this terminates with its exact vertex set
    (deduplicated at EPS_GEOM).
    """
    if z.dim != 2:
        raise GeometryError(f"cz_to_polygon needs a 2D set, got dim {z.dim}")
    if cz_is_empty(z):
        raise EmptyRegionError("cannot convert an empty set to a polygon")

    scale = max(1.0, float(np.abs(z.center).sum() + np.abs(z.generators).sum()))
    tol = max(EPS_GEOM, 1e-12 * scale)

    points: list[tuple[float, float]] = []
    for k in range(8):
        ang = 2.0 * math.pi * k / 8.0
        _, pt = cz_support(z, (math.cos(ang), math.sin(ang)))
        points.append((float(pt[0]), float(pt[1])))

    for _ in range(256):
        hull = _convex_hull(points)
        if len(hull) < 3:
            break
        grew = False
        m = len(hull)
        for i in range(m):
            px, py = hull[i]
            qx, qy = hull[(i + 1) % m]
            ex, ey = qx - px, qy - py
            norm = math.hypot(ex, ey)
            if norm <= tol:
                continue
            nx, ny = ey / norm, -ex / norm  # outward normal of a CCW edge
            h, pt = cz_support(z, (nx, ny))
            if h > nx * px + ny * py + tol:
                points.append((float(pt[0]), float(pt[1])))
                grew = True
        if not grew:
            break

    hull = _convex_hull(points)
    if len(hull) < 3:
        raise DegenerateRegionError("degenerate region: set has no planar area")
    poly = ConvexPolygon(hull)
    if poly.area < EPS_AREA:
        raise DegenerateRegionError("degenerate region: set has no planar area")
    return poly


def cz_sample(z: ConstrainedZonotope, count: int, rng: np.random.Generator) -> np.ndarray:
    """Sample member points by rejection in the constraint-satisfying slice.

    Draws coefficients in the affine subspace ``A xi = b`` (via a particular
    solution plus its null space) and keeps those inside the unit box; for an
    unconstrained zonotope this is plain box sampling. Returns up to ``count``
    points (fewer when the feasible slice is thin).
    """
    ng = z.n_generators
    if ng == 0:
        return np.tile(z.center, (count, 1))
    if z.n_constraints == 0:
        xi = rng.uniform(-1.0, 1.0, size=(count, ng))
        return z.center + xi @ z.generators.T
    xi0, *_ = np.linalg.lstsq(z.con_a, z.con_b, rcond=None)
    _, s, vt = np.linalg.svd(z.con_a)
    rank = int((s > 1e-10 * max(1.0, s.max(initial=0.0))).sum())
    null = vt[rank:].T  # (ng, k)
    k = null.shape[1]
    if k == 0:
        point = z.center + z.generators @ xi0
        inside = np.abs(xi0).max(initial=0.0) <= 1.0 + 1e-9
        return np.tile(point, (count, 1)) if inside else np.zeros((0, z.dim))
    radius = math.sqrt(ng)
    keep: list[np.ndarray] = []
    for _ in range(200):
        u = rng.uniform(-radius, radius, size=(4 * count, k))
        xi = xi0 + u @ null.T
        ok = np.abs(xi).max(axis=1) <= 1.0
        keep.extend(xi[ok])
        if len(keep) >= count:
            break
    if not keep:
        return np.zeros((0, z.dim))
    xi_all = np.array(keep[:count])
    return z.center + xi_all @ z.generators.T
