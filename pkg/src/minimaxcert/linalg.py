"""Dense linear algebra and a small LP kernel.

Matrices are plain numpy ndarrays (row-major).  The linear solver is
partial-pivoted elimination with an explicit, reported pivot threshold; the LP
solver is a dense two-phase simplex with Bland's anti-cycling rule.  Both are
deterministic.  Nullspaces and restricted eigenvalues use numpy's SVD/eigh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PIVOT_RTOL = 1e-12
SOLVE_RESIDUAL_TOL = 1e-10
LP_TOL = 1e-9


class SingularMatrixError(Exception):
    def __init__(self, pivot: float, step: int, scale: float):
        self.pivot = pivot
        self.step = step
        self.scale = scale
        super().__init__(
            f"matrix singular to tolerance: pivot {pivot:.3e} at step {step} "
            f"(threshold {PIVOT_RTOL:.0e} * scale {scale:.3e})"
        )


class LinearSolveError(Exception):
    pass


@dataclass
class PLUFactors:
    """Combined L\\U storage with row permutation and pivot magnitudes."""

    lu: np.ndarray
    perm: np.ndarray
    pivots: np.ndarray
    scale: float

    @property
    def min_pivot(self) -> float:
        return float(self.pivots.min()) if self.pivots.size else np.inf

    def solve(self, b: np.ndarray) -> np.ndarray:
        n = self.lu.shape[0]
        b = np.asarray(b, dtype=float)
        single = b.ndim == 1
        B = b.reshape(n, -1)[self.perm].astype(float)
        for k in range(n):  # forward
            B[k + 1 :] -= np.outer(self.lu[k + 1 :, k], B[k])
        for k in range(n - 1, -1, -1):  # backward
            B[k] /= self.lu[k, k]
            B[:k] -= np.outer(self.lu[:k, k], B[k])
        return B[:, 0] if single else B


def plu(A: np.ndarray) -> PLUFactors:
    """Partial-pivoted LU; raises SingularMatrixError below the pivot threshold."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise LinearSolveError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    lu = A.copy()
    perm = np.arange(n)
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    threshold = PIVOT_RTOL * max(scale, 1.0)
    pivots = np.zeros(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        pivot = abs(lu[p, k])
        pivots[k] = pivot
        if pivot < threshold:
            raise SingularMatrixError(pivot, k, scale)
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1 :, k] /= lu[k, k]
        lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    return PLUFactors(lu=lu, perm=perm, pivots=pivots, scale=scale)


def smallest_pivot(A: np.ndarray) -> float:
    """min |pivot| of the partial-pivoted elimination (0.0 when it breaks down)."""
    try:
        return plu(A).min_pivot
    except SingularMatrixError as exc:
        return float(exc.pivot)


def solve_linear(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve Az = b; guarantees ||Az - b||_inf <= 1e-10 (1 + ||b||_inf) or raises."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    factors = plu(A)
    z = factors.solve(b)
    bound = SOLVE_RESIDUAL_TOL * (1.0 + float(np.max(np.abs(b), initial=0.0)))
    resid = float(np.max(np.abs(A @ z - b), initial=0.0))
    if resid > bound:
        z = z + factors.solve(b - A @ z)  # one refinement step
        resid = float(np.max(np.abs(A @ z - b), initial=0.0))
        if resid > bound:
            raise LinearSolveError(
                f"solve residual {resid:.3e} exceeds bound {bound:.3e}"
            )
    return z


def nullspace_basis(A: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical nullspace: ||A b||_inf <= tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        A = np.atleast_2d(A)
    ncols = A.shape[1]
    if A.shape[0] == 0 or not np.any(A):
        return np.eye(ncols)
    _, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > tol))
    return vt[rank:].T.copy()


def smallest_singular_value(A: np.ndarray) -> float:
    """sigma_min of A; +inf for an empty matrix (vacuous rank conditions)."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.inf
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def max_eigenvalue_on_subspace(M: np.ndarray, basis: np.ndarray) -> float:
    """Largest eigenvalue of basis^T M basis; -inf for a zero-column basis."""
    M = np.asarray(M, dtype=float)
    if M.size and float(np.max(np.abs(M - M.T))) > 1e-10:
        raise ValueError("matrix is not symmetric to 1e-10")
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 2 or basis.shape[1] == 0:
        return -np.inf
    reduced = basis.T @ M @ basis
    reduced = 0.5 * (reduced + reduced.T)
    return float(np.linalg.eigvalsh(reduced)[-1])


def min_eigenvalue_on_subspace(M: np.ndarray, basis: np.ndarray) -> float:
    """Smallest eigenvalue of basis^T M basis; +inf for a zero-column basis."""
    val = max_eigenvalue_on_subspace(-np.asarray(M, dtype=float), basis)
    return -val


# ---------------------------------------------------------------------------
# linear programming: maximize c^T z  s.t.  A_eq z = b_eq, A_in z <= b_in,
# lower <= z <= upper  (entries may be +-inf)


@dataclass
class LpProblem:
    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_in: np.ndarray | None = None
    b_in: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        nv = self.c.shape[0]
        if self.A_eq is None:
            self.A_eq = np.zeros((0, nv))
            self.b_eq = np.zeros(0)
        else:
            self.A_eq = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
            self.b_eq = np.atleast_1d(np.asarray(self.b_eq, dtype=float))
        if self.A_in is None:
            self.A_in = np.zeros((0, nv))
            self.b_in = np.zeros(0)
        else:
            self.A_in = np.atleast_2d(np.asarray(self.A_in, dtype=float))
            self.b_in = np.atleast_1d(np.asarray(self.b_in, dtype=float))
        self.lower = (
            np.full(nv, -np.inf) if self.lower is None
            else np.atleast_1d(np.asarray(self.lower, dtype=float))
        )
        self.upper = (
            np.full(nv, np.inf) if self.upper is None
            else np.atleast_1d(np.asarray(self.upper, dtype=float))
        )
        if self.A_eq.shape != (self.b_eq.shape[0], nv):
            raise ValueError("A_eq/b_eq dimensions inconsistent")
        if self.A_in.shape != (self.b_in.shape[0], nv):
            raise ValueError("A_in/b_in dimensions inconsistent")
        if self.lower.shape != (nv,) or self.upper.shape != (nv,):
            raise ValueError("bound dimensions inconsistent")


@dataclass
class LpSolution:
    status: str  # 'optimal' | 'infeasible' | 'unbounded'
    z: np.ndarray | None
    value: float | None
    iterations: int = 0
    # dual data over the standard-form rows; kept for internal certification
    dual_std: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual_objective: float | None = None


class LpCyclingError(Exception):
    """Iteration cap reached (unreachable with Bland's rule in exact arithmetic)."""


def _to_standard_form(p: LpProblem):
    """Rewrite with nonnegative variables s and equality rows As = b.

    Returns (A, b, c_std, const, back) where back maps s -> original z.
    """
    nv = p.c.shape[0]
    cols: list[tuple[int, float]] = []  # (original var, sign)
    offsets = np.zeros(nv)
    extra_rows: list[tuple[int, float]] = []  # (col index, upper bound) for boxed vars
    for j in range(nv):
        lo, up = p.lower[j], p.upper[j]
        if np.isfinite(lo):
            offsets[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(up):
                extra_rows.append((len(cols) - 1, up - lo))
        elif np.isfinite(up):
            offsets[j] = up
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ns = len(cols)
    T = np.zeros((nv, ns))  # z = offsets + T s
    for k, (j, sgn) in enumerate(cols):
        T[j, k] = sgn

    A_eq = p.A_eq @ T
    b_eq = p.b_eq - p.A_eq @ offsets
    A_in = p.A_in @ T
    b_in = p.b_in - p.A_in @ offsets
    if extra_rows:
        box = np.zeros((len(extra_rows), ns))
        box_b = np.zeros(len(extra_rows))
        for r, (k, ub) in enumerate(extra_rows):
            box[r, k] = 1.0
            box_b[r] = ub
        A_in = np.vstack([A_in, box])
        b_in = np.concatenate([b_in, box_b])

    n_in = A_in.shape[0]
    A = np.zeros((A_eq.shape[0] + n_in, ns + n_in))
    A[: A_eq.shape[0], :ns] = A_eq
    A[A_eq.shape[0] :, :ns] = A_in
    A[A_eq.shape[0] :, ns:] = np.eye(n_in)
    b = np.concatenate([b_eq, b_in])
    c_std = np.zeros(ns + n_in)
    c_std[:ns] = p.c @ T
    const = float(p.c @ offsets)
    return A, b, c_std, const, (T, offsets, ns)


def _simplex_phase(T, basis, cost_row, max_iter, tol):
    """Run Bland-rule simplex on tableau T (rows x cols+1, rhs last column).

    cost_row holds reduced costs for maximization (positive = improving) with
    the objective value's negative in its last entry.  Mutates T/basis/cost_row.
    """
    m = T.shape[0]
    it = 0
    while True:
        it += 1
        if it > max_iter:
            raise LpCyclingError(f"simplex iteration cap {max_iter} reached")
        enter = -1
        for j in range(T.shape[1] - 1):
            if cost_row[j] > tol:
                enter = j
                break
        if enter < 0:
            return it
        best_ratio = None
        leave = -1
        for i in range(m):
            a = T[i, enter]
            if a > tol:
                ratio = T[i, -1] / a
                if best_ratio is None or ratio < best_ratio - tol:
                    best_ratio = ratio
                    leave = i
                elif abs(ratio - best_ratio) <= tol and basis[i] < basis[leave]:
                    leave = i
        if leave < 0:
            return -1  # unbounded direction on entering column
        piv = T[leave, enter]
        T[leave] /= piv
        for i in range(m):
            if i != leave and T[i, enter] != 0.0:
                T[i] -= T[i, enter] * T[leave]
        cost_row -= cost_row[enter] * T[leave]
        basis[leave] = enter


def solve_lp(p: LpProblem, tol: float = LP_TOL, max_iter: int = 5000) -> LpSolution:
    """Dense two-phase simplex with Bland's rule; deterministic."""
    nv = p.c.shape[0]
    if nv == 0:
        feas = np.all(np.abs(p.b_eq) <= tol) and np.all(p.b_in >= -tol)
        if feas:
            return LpSolution("optimal", np.zeros(0), 0.0)
        return LpSolution("infeasible", None, None)

    A, b, c_std, const, (T_map, offsets, ns) = _to_standard_form(p)
    m, ncols = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b = np.abs(b) * 1.0
    b[b == 0.0] = 0.0

    # phase 1: artificials on every row
    T = np.zeros((m, ncols + m + 1))
    T[:, :ncols] = A
    T[:, ncols : ncols + m] = np.eye(m)
    T[:, -1] = b
    basis = list(range(ncols, ncols + m))
    cost = np.zeros(ncols + m + 1)
    cost[:ncols] = T[:, :ncols].sum(axis=0)  # reduced costs of max(-sum artificials)
    cost[-1] = b.sum()
    iters = _simplex_phase(T, basis, cost, max_iter, tol)
    if iters < 0:
        raise LpCyclingError("phase-1 reported unbounded; artificial sum is bounded")
    phase1 = cost[-1]  # remaining infeasibility
    if phase1 > tol * max(1.0, float(np.max(np.abs(b), initial=0.0))):
        return LpSolution("infeasible", None, None, iterations=iters)

    # drive residual artificials out of the basis, drop redundant rows
    keep_rows = []
    for i in range(m):
        if basis[i] >= ncols:
            pivot_col = -1
            for j in range(ncols):
                if abs(T[i, j]) > tol:
                    pivot_col = j
                    break
            if pivot_col < 0:
                continue  # redundant constraint row
            piv = T[i, pivot_col]
            T[i] /= piv
            for r in range(m):
                if r != i and T[r, pivot_col] != 0.0:
                    T[r] -= T[r, pivot_col] * T[i]
            basis[i] = pivot_col
        keep_rows.append(i)
    T2 = T[keep_rows][:, list(range(ncols)) + [ncols + m]]
    basis2 = [basis[i] for i in keep_rows]

    # phase 2
    cost2 = np.zeros(ncols + 1)
    cost2[:ncols] = c_std
    for i, bi in enumerate(basis2):
        if abs(cost2[bi]) > 0.0:
            cost2 -= cost2[bi] * T2[i]
    iters2 = _simplex_phase(T2, basis2, cost2, max_iter, tol)
    if iters2 < 0:
        return LpSolution("unbounded", None, None, iterations=iters)

    s = np.zeros(ncols)
    for i, bi in enumerate(basis2):
        s[bi] = T2[i, -1]
    z = offsets + T_map @ s[:ns]
    value = float(c_std @ s) + const

    # dual certificate: y solves B^T y = c_B over the surviving rows
    dual_std = np.zeros(m)
    rows = keep_rows
    if rows:
        B = A[rows][:, basis2].T
        try:
            y = np.linalg.solve(B, c_std[basis2])
        except np.linalg.LinAlgError:
            y = np.linalg.lstsq(B, c_std[basis2], rcond=None)[0]
        for r, i in enumerate(rows):
            dual_std[i] = y[r]
    dual_obj = float(dual_std @ b) + const
    return LpSolution(
        "optimal",
        z,
        value,
        iterations=iters + iters2,
        dual_std=dual_std,
        dual_objective=dual_obj,
    )
