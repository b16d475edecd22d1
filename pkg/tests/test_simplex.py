import numpy as np
import pytest

from zsmurban.geom import LinearProgramError, solve_standard_form


def test_simple_minimization():
    # min x1 + 2 x2 s.t. x1 + x2 = 1 -> x = (1, 0)
    feasible, x, obj = solve_standard_form(np.array([[1.0, 1.0]]), np.array([1.0]),
                                           np.array([1.0, 2.0]))
    assert feasible
    assert obj == pytest.approx(1.0, abs=1e-9)
    assert x == pytest.approx([1.0, 0.0], abs=1e-9)


def test_infeasible_system():
    # x1 + x2 = -1 with x >= 0 is infeasible
    feasible, x, residual = solve_standard_form(np.array([[1.0, 1.0]]), np.array([-1.0]))
    assert not feasible
    assert x is None
    assert residual > 1e-3


def test_feasibility_only_returns_point():
    a = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
    b = np.array([1.0, 1.0])
    feasible, x, _ = solve_standard_form(a, b)
    assert feasible
    assert a @ x == pytest.approx(b, abs=1e-8)
    assert (x >= -1e-12).all()


def test_redundant_rows_are_tolerated():
    a = np.array([[1.0, 1.0], [2.0, 2.0]])
    b = np.array([1.0, 2.0])
    feasible, x, _ = solve_standard_form(a, b, np.array([0.0, 1.0]))
    assert feasible
    assert x == pytest.approx([1.0, 0.0], abs=1e-9)


def test_degenerate_cycling_guard_terminates():
    # Degenerate random systems; Bland's rule must terminate. Nonnegative
    # costs keep every instance bounded.
    rng = np.random.default_rng(7)
    for _ in range(25):
        m, n = 4, 9
        a = rng.normal(size=(m, n))
        x_feas = np.abs(rng.normal(size=n))
        b = a @ x_feas
        cost = np.abs(rng.normal(size=n))
        feasible, x, _ = solve_standard_form(a, b, cost)
        assert feasible
        assert a @ x == pytest.approx(b, abs=1e-7)


def test_pivot_budget_raises_distinct_error():
    a = np.array([[1.0, 1.0]])
    b = np.array([1.0])
    with pytest.raises(LinearProgramError):
        solve_standard_form(a, b, np.array([1.0, 2.0]), max_pivots=0)


def test_against_reference_solver():
    # Random LPs cross-checked against scipy's independent implementation.
    # Bounded variables (0 <= x <= u, folded to standard form with slacks)
    # keep every instance feasible and bounded.
    scipy_linprog = pytest.importorskip("scipy.optimize").linprog
    rng = np.random.default_rng(3)
    for _ in range(20):
        m, n = 3, 7
        a = rng.normal(size=(m, n))
        x_feas = rng.uniform(0.2, 0.8, size=n)
        b = a @ x_feas
        cost = rng.normal(size=n)
        ref = scipy_linprog(cost, A_eq=a, b_eq=b, bounds=(0, 1), method="highs")
        a_std = np.vstack([
            np.hstack([a, np.zeros((m, n))]),
            np.hstack([np.eye(n), np.eye(n)]),
        ])
        b_std = np.concatenate([b, np.ones(n)])
        cost_std = np.concatenate([cost, np.zeros(n)])
        feasible, _, obj = solve_standard_form(a_std, b_std, cost_std)
        assert feasible == ref.success
        assert obj == pytest.approx(ref.fun, rel=1e-6, abs=1e-7)
