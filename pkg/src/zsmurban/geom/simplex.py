"""Dense two-phase simplex for small equality-constrained feasibility problems.

Every linear program in this package has at most a few dozen variables, so a
plain tableau with Bland's anti-cycling rule is fast enough and fully
deterministic; no external solver is pulled in.
"""

from __future__ import annotations

import numpy as np

__all__ = ["LinearProgramError", "solve_standard_form"]

# Entries below this magnitude are treated as exact zeros during pivoting.
_PIVOT_TOL = 1e-10


class LinearProgramError(RuntimeError):
    """Simplex failed to terminate within its pivot budget.

    Deliberately distinct from an infeasible verdict: callers must never map
    a solver breakdown to "empty set".
    """


def _bland_iterate(tableau: np.ndarray, basis: np.ndarray, n_cols: int, max_pivots: int) -> None:
    """Run simplex pivots in place until the cost row is non-negative.

    ``tableau`` has shape (m+1, n_cols+1); the last row is the reduced-cost
    row, the last column the right-hand side. Entering variable: lowest index
    with negative reduced cost. Leaving variable: minimum ratio, ties broken
    by lowest basic-variable index (Bland's rule, immune to cycling).
    """
    m = tableau.shape[0] - 1
    for _ in range(max_pivots):
        cost = tableau[m, :n_cols]
        candidates = np.nonzero(cost < -_PIVOT_TOL)[0]
        if candidates.size == 0:
            return
        col = int(candidates[0])

        pivots = np.nonzero(tableau[:m, col] > _PIVOT_TOL)[0]
        if pivots.size == 0:
            # Unbounded direction; impossible for the box-bounded problems we
            # build, so treat it as a breakdown rather than guessing.
            raise LinearProgramError("unbounded pivot column in simplex")
        ratios = tableau[pivots, -1] / tableau[pivots, col]
        best = ratios.min()
        tied = pivots[ratios <= best + _PIVOT_TOL]
        row = int(tied[np.argmin(basis[tied])])

        piv = tableau[row, col]
        tableau[row, :] /= piv
        factors = tableau[:, col].copy()
        factors[row] = 0.0
        tableau -= np.outer(factors, tableau[row, :])
        tableau[:, col] = 0.0
        tableau[row, col] = 1.0
        basis[row] = col
    raise LinearProgramError("pivot budget exhausted")


def solve_standard_form(
    a_eq: np.ndarray,
    b_eq: np.ndarray,
    cost: np.ndarray | None = None,
    *,
    feas_tol: float = 1e-8,
    max_pivots: int | None = None,
) -> tuple[bool, np.ndarray | None, float]:
    """Solve ``min cost @ x  s.t.  a_eq @ x = b_eq, x >= 0``.

    Returns ``(feasible, x, objective)``. With ``cost=None`` only phase 1 is
    run and ``objective`` is the residual infeasibility measure. Rows are
    rescaled so that ``feas_tol`` acts as a relative tolerance.

    Raises:
        LinearProgramError: pivot budget exhausted (never silently mapped to
            an infeasible verdict).
    """
    a = np.array(a_eq, dtype=float, copy=True)
    b = np.array(b_eq, dtype=float, copy=True)
    if a.ndim != 2 or b.ndim != 1 or a.shape[0] != b.shape[0]:
        raise ValueError(f"inconsistent LP shapes: A {a.shape}, b {b.shape}")
    m, n = a.shape
    if max_pivots is None:
        max_pivots = 200 + 50 * (m + n)

    if m == 0:
        x0 = np.zeros(n)
        return True, x0, 0.0 if cost is None else float(np.dot(cost, x0))

    scale = np.maximum(1.0, np.abs(a).max(axis=1, initial=0.0))
    a /= scale[:, None]
    b /= scale
    flip = b < 0.0
    a[flip] *= -1.0
    b[flip] *= -1.0

    # Phase 1: artificial variables form the starting basis.
    n_total = n + m
    tableau = np.zeros((m + 1, n_total + 1))
    tableau[:m, :n] = a
    tableau[:m, n:n_total] = np.eye(m)
    tableau[:m, -1] = b
    # Reduced costs for objective sum(artificials) with that basis.
    tableau[m, :n] = -a.sum(axis=0)
    tableau[m, -1] = -b.sum()
    basis = np.arange(n, n_total)

    _bland_iterate(tableau, basis, n_total, max_pivots)
    infeasibility = -tableau[m, -1]
    if infeasibility > feas_tol:
        return False, None, float(infeasibility)

    # Drive leftover artificial variables out of the basis; a row with no
    # usable pivot is a redundant constraint and can be neutralized.
    for row in range(m):
        if basis[row] < n:
            continue
        pivot_cols = np.nonzero(np.abs(tableau[row, :n]) > _PIVOT_TOL)[0]
        if pivot_cols.size == 0:
            tableau[row, :] = 0.0
            basis[row] = basis[row]  # stays artificial but the row is inert
            continue
        col = int(pivot_cols[0])
        piv = tableau[row, col]
        tableau[row, :] /= piv
        factors = tableau[:, col].copy()
        factors[row] = 0.0
        tableau -= np.outer(factors, tableau[row, :])
        tableau[:, col] = 0.0
        tableau[row, col] = 1.0
        basis[row] = col

    def _extract() -> np.ndarray:
        x = np.zeros(n)
        for row in range(m):
            if basis[row] < n:
                x[basis[row]] = tableau[row, -1]
        return x

    if cost is None:
        return True, _extract(), float(infeasibility)

    c = np.asarray(cost, dtype=float)
    if c.shape != (n,):
        raise ValueError(f"cost shape {c.shape} does not match {n} variables")

    # Phase 2: forbid artificial columns and rebuild the reduced-cost row.
    tableau[:m, n:n_total] = 0.0
    tableau[m, :] = 0.0
    tableau[m, :n] = c
    for row in range(m):
        if basis[row] < n:
            tableau[m, :] -= c[basis[row]] * tableau[row, :]
    _bland_iterate(tableau, basis, n, max_pivots)

    x = _extract()
    return True, x, float(np.dot(c, x))
