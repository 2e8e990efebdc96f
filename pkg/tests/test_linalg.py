import numpy as np
import pytest

from minimaxcert.linalg import (
    LpProblem,
    SingularMatrixError,
    max_eigenvalue_on_subspace,
    nullspace_basis,
    plu,
    smallest_pivot,
    smallest_singular_value,
    solve_linear,
    solve_lp,
)


def test_solve_identity():
    z = solve_linear(np.eye(3), np.array([1.0, 2.0, 3.0]))
    assert np.allclose(z, [1.0, 2.0, 3.0])


def test_solve_sensitivity_fixture():
    # K(0) of the first reference problem; det = 4, first solution entry -1
    K = np.array([[-1.0, 0.0, 1.0], [0.0, 0.0, 2.0], [1.0, 2.0, 0.0]])
    assert np.linalg.det(K) == pytest.approx(4.0)
    z = solve_linear(K, np.array([1.0, 0.0, 0.0]))
    assert np.allclose(z, [-1.0, 0.5, 0.0], atol=1e-12)


def test_singular_matrix_reports_pivot():
    with pytest.raises(SingularMatrixError) as err:
        solve_linear(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 0.0]))
    assert err.value.pivot < 1e-10


def test_solve_residual_on_random_well_conditioned():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(1, 9))
        A = rng.standard_normal((n, n)) + 3.0 * np.eye(n)
        while np.linalg.cond(A) > 1e6:
            A = rng.standard_normal((n, n)) + 3.0 * np.eye(n)
        b = rng.standard_normal(n)
        z = solve_linear(A, b)
        res = np.max(np.abs(A @ z - b))
        assert res <= 1e-8 * np.max(np.abs(b))


def test_smallest_pivot_reporting():
    assert smallest_pivot(np.eye(2)) == pytest.approx(1.0)
    assert smallest_pivot(np.array([[1.0, 1.0], [1.0, 1.0]])) < 1e-12


def test_nullspace_axis_case():
    basis = nullspace_basis(np.array([[1.0, 0.0]]), 1e-10)
    assert basis.shape == (2, 1)
    assert abs(abs(basis[1, 0]) - 1.0) < 1e-12
    assert np.max(np.abs(np.array([[1.0, 0.0]]) @ basis)) <= 1e-10


def test_nullspace_zero_matrix():
    basis = nullspace_basis(np.zeros((1, 2)), 1e-10)
    assert basis.shape == (2, 2)
    assert np.allclose(basis.T @ basis, np.eye(2), atol=1e-10)


def test_nullspace_sum_row():
    A = np.array([[1.0, 1.0]])
    basis = nullspace_basis(A, 1e-10)
    assert basis.shape == (2, 1)
    assert np.max(np.abs(A @ basis)) <= 1e-12
    assert abs(abs(basis[0, 0]) - 1 / np.sqrt(2)) < 1e-12


def test_nullspace_orthonormal_property():
    rng = np.random.default_rng(5)
    for _ in range(20):
        rows = int(rng.integers(0, 4))
        cols = int(rng.integers(1, 6))
        A = rng.standard_normal((rows, cols)) if rows else np.zeros((0, cols))
        basis = nullspace_basis(A, 1e-10)
        if basis.shape[1]:
            assert np.max(np.abs(basis.T @ basis - np.eye(basis.shape[1]))) <= 1e-10
        if rows:
            assert np.max(np.abs(A @ basis), initial=0.0) <= 1e-9


def test_max_eigenvalue_on_subspace():
    M = np.diag([-2.0, 5.0])
    basis = np.array([[1.0], [0.0]])
    assert max_eigenvalue_on_subspace(M, basis) == pytest.approx(-2.0)
    # scalar case: certifies negative definiteness on the whole line
    assert max_eigenvalue_on_subspace(np.array([[-2.0]]), np.eye(1)) == pytest.approx(-2.0)
    # empty basis: vacuously negative definite
    assert max_eigenvalue_on_subspace(M, np.zeros((2, 0))) == -np.inf
    with pytest.raises(ValueError):
        max_eigenvalue_on_subspace(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2))


def test_smallest_singular_value_empty():
    assert smallest_singular_value(np.zeros((0, 3))) == np.inf


def test_lp_opposing_rows_force_zero():
    # maximize t  s.t.  d + t <= 0, -d + t <= 0, |d| <= 1
    p = LpProblem(
        c=[0.0, 1.0],
        A_in=[[1.0, 1.0], [-1.0, 1.0]],
        b_in=[0.0, 0.0],
        lower=[-1.0, -np.inf],
        upper=[1.0, np.inf],
    )
    sol = solve_lp(p)
    assert sol.status == "optimal"
    assert sol.value == pytest.approx(0.0, abs=1e-9)


def test_lp_single_constraint_geometry():
    # maximize t  s.t.  -d + t <= 0, |d| <= 1  ->  t* = 1 at d = 1
    p = LpProblem(
        c=[0.0, 1.0],
        A_in=[[-1.0, 1.0]],
        b_in=[0.0],
        lower=[-1.0, -np.inf],
        upper=[1.0, np.inf],
    )
    sol = solve_lp(p)
    assert sol.status == "optimal"
    assert sol.value == pytest.approx(1.0, abs=1e-9)
    assert sol.z[0] == pytest.approx(1.0, abs=1e-9)


def test_lp_infeasible():
    p = LpProblem(
        c=[1.0],
        A_in=[[1.0], [-1.0]],
        b_in=[-1.0, -1.0],  # z <= -1 and z >= 1
    )
    assert solve_lp(p).status == "infeasible"


def test_lp_unbounded():
    p = LpProblem(c=[1.0], A_in=[[-1.0]], b_in=[0.0])
    assert solve_lp(p).status == "unbounded"


def test_lp_equalities_and_free_variables():
    # maximize u + v  s.t.  u + v = 1, v >= 0  ->  value 1
    p = LpProblem(
        c=[1.0, 1.0],
        A_eq=[[1.0, 1.0]],
        b_eq=[1.0],
        lower=[-np.inf, 0.0],
    )
    sol = solve_lp(p)
    assert sol.status == "optimal"
    assert sol.value == pytest.approx(1.0, abs=1e-9)


def test_lp_duals_reproduce_objective():
    rng = np.random.default_rng(23)
    for _ in range(20):
        nv = int(rng.integers(1, 5))
        ni = int(rng.integers(1, 4))
        A_in = rng.standard_normal((ni, nv))
        b_in = rng.uniform(0.5, 2.0, ni)
        c = rng.standard_normal(nv)
        p = LpProblem(c=c, A_in=A_in, b_in=b_in, lower=-np.ones(nv), upper=np.ones(nv))
        sol = solve_lp(p)
        assert sol.status == "optimal"
        assert np.all(A_in @ sol.z <= b_in + 1e-9)
        assert np.all(sol.z >= -1.0 - 1e-9) and np.all(sol.z <= 1.0 + 1e-9)
        assert sol.dual_objective == pytest.approx(sol.value, abs=1e-8)


def test_plu_solve_multiple_rhs():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    B = rng.standard_normal((4, 3))
    X = plu(A).solve(B)
    assert np.max(np.abs(A @ X - B)) < 1e-10
