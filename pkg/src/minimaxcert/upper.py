"""Outer-minimization conditions: MFCQ, the multiplier polytope, critical
cones, and the second-order / nonsmooth first-order optimality tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .conditions import (
    ERROR,
    INCONCLUSIVE,
    KIND_NECESSARY,
    KIND_QUALIFICATION,
    KIND_SUFFICIENT,
    NOT_FOUND_SAMPLED,
    SATISFIED,
    SATISFIED_SAMPLED,
    VIOLATED,
    ConditionCheck,
)
from .config import CheckConfig
from .cones import (
    cone_contains,
    cone_is_subspace,
    cone_is_trivial,
    cone_subspace_basis,
    sample_cone,
)
from .linalg import (
    LpProblem,
    SingularMatrixError,
    min_eigenvalue_on_subspace,
    smallest_singular_value,
    solve_lp,
)
from .lower import KktSolution, classify_partition, lagrangian_eval
from .nonsmooth import (
    GeneralizedDerivativeSet,
    assemble_h_matrix,
    clarke_selector_grid,
    enumerate_b_selectors,
)
from .problem import ProblemSpec, eval_bundle
from .value_function import ValueDerivatives

from .expressions import evaluate


@dataclass
class UpperData:
    """H, G values/Jacobians/Hessians at x (independent of y)."""

    H: np.ndarray
    JH: np.ndarray
    Hxx: np.ndarray
    G: np.ndarray
    JG: np.ndarray
    Gxx: np.ndarray


def upper_data(spec: ProblemSpec, x) -> UpperData:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ydummy = np.zeros(spec.m)
    t = spec._tables
    n = spec.n

    def vec(exprs):
        return np.array([float(evaluate(e, x, ydummy)) for e in exprs], dtype=float)

    def mat(rows):
        return np.array([[float(evaluate(e, x, ydummy)) for e in r] for r in rows])

    Hv = vec(spec.H) if spec.n1 else np.zeros(0)
    Gv = vec(spec.G) if spec.n2 else np.zeros(0)
    JH = np.zeros((spec.n1, n))
    Hxx = np.zeros((spec.n1, n, n))
    for k, row in enumerate(t["H"]):
        JH[k] = vec(row["x"])
        Hxx[k] = mat(row["xx"])
    JG = np.zeros((spec.n2, n))
    Gxx = np.zeros((spec.n2, n, n))
    for k, row in enumerate(t["G"]):
        JG[k] = vec(row["x"])
        Gxx[k] = mat(row["xx"])
    return UpperData(H=Hv, JH=JH, Hxx=Hxx, G=Gv, JG=JG, Gxx=Gxx)


@dataclass
class UpperActiveSet:
    I: tuple[int, ...]
    n1: int
    feasible: bool
    worst_violation: float


def compute_upper_active_set(spec: ProblemSpec, x, tol_act: float = 1e-8) -> UpperActiveSet:
    data = upper_data(spec, x)
    viol = 0.0
    if data.H.size:
        viol = max(viol, float(np.max(np.abs(data.H))))
    if data.G.size:
        viol = max(viol, float(np.max(data.G)))
    active = tuple(i for i in range(spec.n2) if abs(data.G[i]) <= tol_act)
    return UpperActiveSet(I=active, n1=spec.n1, feasible=viol <= tol_act, worst_violation=viol)


@dataclass
class MfcqResult:
    check: ConditionCheck
    witness: np.ndarray | None
    active: tuple[int, ...]
    jh_sigma_min: float
    lp_value: float | None


def check_mfcq(spec: ProblemSpec, x, config: CheckConfig | None = None) -> MfcqResult:
    """Full-rank equality Jacobian plus a strictly feasible direction, found by
    LP: maximize t s.t. JH d = 0, dG_i . d + t <= 0 (active i), |d|_inf <= 1."""
    config = config or CheckConfig()
    data = upper_data(spec, x)
    aset = compute_upper_active_set(spec, x, config.tol_act)
    if not aset.feasible:
        raise ValueError(
            f"x is infeasible for the outer constraints "
            f"(violation {aset.worst_violation:.3e})"
        )
    sigma = smallest_singular_value(data.JH) if spec.n1 else np.inf
    if spec.n1 and sigma < config.tol_mfcq:
        check = ConditionCheck(
            "mfcq", VIOLATED, sigma, config.tol_mfcq,
            kind=KIND_QUALIFICATION,
            detail="equality-constraint Jacobian is rank deficient",
        )
        return MfcqResult(check, None, aset.I, sigma, None)
    if not aset.I:
        check = ConditionCheck(
            "mfcq", SATISFIED, np.inf, config.tol_mfcq, kind=KIND_QUALIFICATION,
            detail="no active inequalities",
        )
        return MfcqResult(check, np.zeros(spec.n), aset.I, sigma, None)
    n = spec.n
    nI = len(aset.I)
    # variables (d, t)
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_in = np.zeros((nI, n + 1))
    A_in[:, :n] = data.JG[list(aset.I)]
    A_in[:, -1] = 1.0
    b_in = np.zeros(nI)
    A_eq = None
    b_eq = None
    if spec.n1:
        A_eq = np.hstack([data.JH, np.zeros((spec.n1, 1))])
        b_eq = np.zeros(spec.n1)
    lower = np.concatenate([-np.ones(n), [-np.inf]])
    upper = np.concatenate([np.ones(n), [np.inf]])
    sol = solve_lp(LpProblem(c, A_eq, b_eq, A_in, b_in, lower, upper))
    if sol.status != "optimal":
        check = ConditionCheck(
            "mfcq", ERROR, None, config.tol_mfcq, kind=KIND_QUALIFICATION,
            detail=f"direction LP returned {sol.status}",
        )
        return MfcqResult(check, None, aset.I, sigma, None)
    tstar = float(sol.value)
    ok = tstar > config.tol_mfcq
    check = ConditionCheck(
        "mfcq",
        SATISFIED if ok else VIOLATED,
        tstar,
        config.tol_mfcq,
        kind=KIND_QUALIFICATION,
        witness=sol.z[:n].tolist() if ok else None,
    )
    return MfcqResult(check, sol.z[:n] if ok else None, aset.I, sigma, tstar)


@dataclass
class LambdaPolytope:
    """Upper multipliers: {(u, v): JH^T u + JG^T v = -r0, v >= 0 on I, v = 0 off I}."""

    r0: np.ndarray
    JH: np.ndarray
    JG: np.ndarray
    active: tuple[int, ...]
    nonempty: bool
    vertices: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    bounded: bool | None = None
    enum_capped: bool = False
    feas_infeasibility: float | None = None

    def vertex_residual(self, u: np.ndarray, v: np.ndarray) -> float:
        r = self.JH.T @ u + self.JG.T @ v + self.r0
        return float(np.max(np.abs(r), initial=0.0))


def _lambda_lp_parts(data: UpperData, active: tuple[int, ...], r0: np.ndarray):
    cols = []
    if data.JH.shape[0]:
        cols.append(data.JH.T)
    if active:
        cols.append(data.JG[list(active)].T)
    nvar = data.JH.shape[0] + len(active)
    A_eq = np.hstack(cols) if cols else np.zeros((r0.shape[0], 0))
    lower = np.concatenate([np.full(data.JH.shape[0], -np.inf), np.zeros(len(active))])
    return A_eq, -r0, lower, nvar


def upper_kkt_and_polytope(
    spec: ProblemSpec, x, working_grad: np.ndarray, config: CheckConfig | None = None
) -> LambdaPolytope:
    """Emptiness by LP feasibility; vertices by basis enumeration when small."""
    config = config or CheckConfig()
    data = upper_data(spec, x)
    aset = compute_upper_active_set(spec, x, config.tol_act)
    r0 = np.atleast_1d(np.asarray(working_grad, dtype=float))
    active = aset.I
    n1 = spec.n1
    A_eq, b_eq, lower, nvar = _lambda_lp_parts(data, active, r0)

    if nvar == 0:
        nonempty = float(np.max(np.abs(r0), initial=0.0)) <= config.tol_kkt
        poly = LambdaPolytope(
            r0=r0, JH=data.JH, JG=data.JG, active=active, nonempty=nonempty,
            bounded=True,
            feas_infeasibility=float(np.max(np.abs(r0), initial=0.0)),
        )
        if nonempty:
            poly.vertices = [(np.zeros(n1), np.zeros(spec.n2))]
        return poly

    feas = solve_lp(LpProblem(np.zeros(nvar), A_eq, b_eq, None, None, lower, None))
    nonempty = feas.status == "optimal"
    poly = LambdaPolytope(
        r0=r0, JH=data.JH, JG=data.JG, active=active, nonempty=nonempty
    )
    if not nonempty:
        return poly

    # boundedness: every coordinate extreme must be a bounded LP
    bounded = True
    for j in range(nvar):
        for sgn in (1.0, -1.0):
            c = np.zeros(nvar)
            c[j] = sgn
            ext = solve_lp(LpProblem(c, A_eq, b_eq, None, None, lower, None))
            if ext.status == "unbounded":
                bounded = False
                break
        if not bounded:
            break
    poly.bounded = bounded

    if n1 + len(active) > config.vertex_enum_cap:
        poly.enum_capped = True
        return poly

    seen = set()
    for size in range(0, len(active) + 1):
        for subset in combinations(range(len(active)), size):
            cols = []
            if n1:
                cols.append(data.JH.T)
            sel = [active[j] for j in subset]
            if sel:
                cols.append(data.JG[sel].T)
            ncol = n1 + len(sel)
            if ncol == 0:
                if float(np.max(np.abs(r0), initial=0.0)) <= 1e-9:
                    key = (0.0,) * (n1 + spec.n2)
                    if key not in seen:
                        seen.add(key)
                        poly.vertices.append((np.zeros(n1), np.zeros(spec.n2)))
                continue
            M = np.hstack(cols)
            if M.shape[1] > M.shape[0] or smallest_singular_value(M) < 1e-10:
                continue  # columns dependent: not a basic solution
            z, *_ = np.linalg.lstsq(M, -r0, rcond=None)
            resid = float(np.max(np.abs(M @ z + r0), initial=0.0))
            if resid > 1e-9:
                continue
            u = z[:n1]
            v = np.zeros(spec.n2)
            ok = True
            for j, i in enumerate(sel):
                if z[n1 + j] < -1e-9:
                    ok = False
                    break
                v[i] = max(z[n1 + j], 0.0)
            if not ok:
                continue
            key = tuple(np.round(np.concatenate([u, v]), 9))
            if key not in seen:
                seen.add(key)
                poly.vertices.append((u, v))
    return poly


@dataclass
class UpperConeRep:
    """Critical cone rows: E = JH, F = [JG_I; working-gradient row (<= 0)].

    The reduced form (equalities forced by positive multipliers) is kept
    alongside when a multiplier is available.
    """

    E: np.ndarray
    F: np.ndarray
    dim: int
    reduced_E: np.ndarray | None = None
    reduced_F: np.ndarray | None = None

    def contains(self, d, tol: float = 1e-9) -> bool:
        return cone_contains(self.E, self.F, d, tol)


def critical_cone_upper(
    spec: ProblemSpec,
    x,
    working_grad: np.ndarray,
    multiplier: tuple[np.ndarray, np.ndarray] | None = None,
    config: CheckConfig | None = None,
) -> UpperConeRep:
    config = config or CheckConfig()
    data = upper_data(spec, x)
    aset = compute_upper_active_set(spec, x, config.tol_act)
    r0 = np.atleast_1d(np.asarray(working_grad, dtype=float))
    E = data.JH if spec.n1 else np.zeros((0, spec.n))
    F_rows = []
    if aset.I:
        F_rows.append(data.JG[list(aset.I)])
    F_rows.append(r0.reshape(1, -1))
    F = np.vstack(F_rows)
    rep = UpperConeRep(E=E, F=F, dim=spec.n)
    if multiplier is not None:
        u, v = multiplier
        strong = [i for i in aset.I if v[i] > config.tol_act]
        weak = [i for i in aset.I if v[i] <= config.tol_act]
        red_E_rows = [E]
        if strong:
            red_E_rows.append(data.JG[strong])
        rep.reduced_E = np.vstack([r for r in red_E_rows if r.size]) if any(
            r.size for r in red_E_rows
        ) else np.zeros((0, spec.n))
        rep.reduced_F = data.JG[weak] if weak else np.zeros((0, spec.n))
    return rep


def _curvature_lp_max(
    poly: LambdaPolytope, data: UpperData, d: np.ndarray, maximize: bool = True
) -> tuple[float, str]:
    """max over the polytope of sum_j u_j <Hxx_j d, d> + sum_i v_i <Gxx_i d, d>."""
    n1 = data.JH.shape[0]
    coef_u = np.array([float(d @ data.Hxx[j] @ d) for j in range(n1)])
    coef_v = np.array([float(d @ data.Gxx[i] @ d) for i in poly.active])
    if poly.vertices and poly.bounded:
        best = -np.inf
        for u, v in poly.vertices:
            val = float(coef_u @ u) + float(
                sum(coef_v[j] * v[i] for j, i in enumerate(poly.active))
            )
            best = max(best, val)
        return best, "vertex"
    nvar = n1 + len(poly.active)
    if nvar == 0:
        return 0.0, "empty"
    A_eq, b_eq, lower, _ = _lambda_lp_parts(data, poly.active, poly.r0)
    c = np.concatenate([coef_u, coef_v])
    sol = solve_lp(LpProblem(c if maximize else -c, A_eq, b_eq, None, None, lower, None))
    if sol.status == "unbounded":
        return np.inf if maximize else -np.inf, "unbounded"
    if sol.status != "optimal":
        return np.nan, sol.status
    return (float(sol.value) if maximize else -float(sol.value)), "lp"


def second_order_necessary(
    spec: ProblemSpec,
    x,
    vd: ValueDerivatives,
    poly: LambdaPolytope,
    cone: UpperConeRep,
    config: CheckConfig | None = None,
) -> tuple[ConditionCheck, list[tuple[np.ndarray, float]]]:
    """For sampled cone directions d, the polytope-max curvature plus the
    value-function curvature must be >= 0 (to tolerance)."""
    config = config or CheckConfig()
    data = upper_data(spec, x)
    if not poly.nonempty:
        return (
            ConditionCheck(
                "second_order_necessary", INCONCLUSIVE, None, config.tol_pd,
                kind=KIND_NECESSARY, detail="multiplier polytope is empty",
            ),
            [],
        )
    directions = sample_cone(cone.E, cone.F, spec.n, config.cone_samples, config.seed)
    evidence = []
    worst = np.inf
    witness = None
    for d in directions:
        base = float(d @ vd.hessian @ d)
        extra, _ = _curvature_lp_max(poly, data, d)
        q = base + extra
        evidence.append((d, q))
        if q < worst:
            worst = q
            witness = d
    if not directions:
        return (
            ConditionCheck(
                "second_order_necessary", SATISFIED, np.inf, config.tol_pd,
                kind=KIND_NECESSARY, detail="critical cone is trivial",
            ),
            [],
        )
    if worst < -config.tol_pd:
        check = ConditionCheck(
            "second_order_necessary", VIOLATED, worst, config.tol_pd,
            kind=KIND_NECESSARY, witness=witness.tolist(),
        )
    else:
        check = ConditionCheck(
            "second_order_necessary", SATISFIED, worst, config.tol_pd,
            kind=KIND_NECESSARY,
            detail=f"{len(directions)} cone directions tested",
        )
    return check, evidence


def _refine_minimum(E, F, dim, d0, value_fn, rounds, seed):
    """Local pattern search of value_fn over unit cone directions near d0."""
    best_d = d0
    best_v = value_fn(d0)
    rng = np.random.default_rng(seed + 1)
    radius = 0.5
    for _ in range(rounds):
        improved = False
        for _ in range(8):
            cand = best_d + radius * rng.standard_normal(dim)
            nrm = float(np.linalg.norm(cand))
            if nrm < 1e-12:
                continue
            cand /= nrm
            if not cone_contains(E, F, cand, 1e-9):
                continue
            val = value_fn(cand)
            if val < best_v - 1e-14:
                best_v = val
                best_d = cand
                improved = True
        if not improved:
            radius *= 0.5
    return best_d, best_v


def second_order_sufficient(
    spec: ProblemSpec,
    x,
    vd: ValueDerivatives,
    poly: LambdaPolytope,
    cone: UpperConeRep,
    config: CheckConfig | None = None,
) -> ConditionCheck:
    """Strict positivity of the same quadratic over the critical cone; exact on
    subspace cones with singleton multipliers, sampled with local refinement
    otherwise (reported as satisfied (sampled), never as proved)."""
    config = config or CheckConfig()
    data = upper_data(spec, x)
    if not poly.nonempty:
        return ConditionCheck(
            "second_order_sufficient", INCONCLUSIVE, None, config.tol_pd,
            kind=KIND_SUFFICIENT, detail="multiplier polytope is empty",
        )
    E = cone.reduced_E if cone.reduced_E is not None else cone.E
    F = cone.reduced_F if cone.reduced_F is not None else cone.F
    if cone_is_trivial(E, F, spec.n):
        return ConditionCheck(
            "second_order_sufficient", SATISFIED, np.inf, config.tol_pd,
            kind=KIND_SUFFICIENT, detail="critical cone is trivial (vacuous)",
        )
    singleton = len(poly.vertices) == 1 and poly.bounded
    if singleton and cone_is_subspace(E, F, spec.n):
        u, v = poly.vertices[0]
        M = vd.hessian.copy()
        for j in range(spec.n1):
            M = M + u[j] * data.Hxx[j]
        for i in range(spec.n2):
            M = M + v[i] * data.Gxx[i]
        basis = cone_subspace_basis(E, F, spec.n)
        margin = min_eigenvalue_on_subspace(M, basis)
        status = SATISFIED if margin >= config.tol_pd else VIOLATED
        return ConditionCheck(
            "second_order_sufficient", status, margin, config.tol_pd,
            kind=KIND_SUFFICIENT,
            detail="exact eigenvalue test on the subspace cone; growth rate "
            "estimate equals the margin",
        )

    def q_sup(d: np.ndarray) -> float:
        base = float(d @ vd.hessian @ d)
        extra, _ = _curvature_lp_max(poly, data, d)
        return base + extra

    directions = sample_cone(E, F, spec.n, config.cone_samples, config.seed)
    if not directions:
        return ConditionCheck(
            "second_order_sufficient", SATISFIED, np.inf, config.tol_pd,
            kind=KIND_SUFFICIENT, detail="no nonzero cone directions (vacuous)",
        )
    values = [q_sup(d) for d in directions]
    i0 = int(np.argmin(values))
    d_best, gamma_hat = _refine_minimum(
        E, F, spec.n, directions[i0], q_sup, config.refine_rounds, config.seed
    )
    if gamma_hat >= config.tol_pd:
        status = SATISFIED_SAMPLED
    elif gamma_hat <= -config.tol_pd:
        status = VIOLATED
    else:
        status = INCONCLUSIVE
    return ConditionCheck(
        "second_order_sufficient", status, gamma_hat, config.tol_pd,
        kind=KIND_SUFFICIENT,
        witness=d_best.tolist() if status == VIOLATED else None,
        detail=f"sampled minimum over {len(directions)} directions "
        f"(growth rate estimate {gamma_hat:.6g})",
    )


def first_order_nonsmooth_necessary(
    spec: ProblemSpec,
    x,
    sol: KktSolution,
    config: CheckConfig | None = None,
) -> tuple[ConditionCheck, GeneralizedDerivativeSet]:
    """Search selectors W for one whose candidate gradient admits upper KKT
    multipliers.  Binary selectors first, then a grid over the Clarke box.
    A failed search is a disproof only when the selector family is exact
    (beta empty); otherwise it reports not-found."""
    config = config or CheckConfig()
    data = upper_data(spec, x)
    aset = compute_upper_active_set(spec, x, config.tol_act)
    bundle = eval_bundle(spec, sol.x, sol.y)
    partition = classify_partition(bundle.g, sol.lam, config.tol_act)
    lag = lagrangian_eval(bundle, sol.mu, sol.lam)
    stack = np.concatenate([lag.grad_y, bundle.h, -bundle.g])

    selectors = enumerate_b_selectors(partition, config.selector_cap)
    exact_family = len(partition.beta) == 0
    if not exact_family:
        known = {s.values for s in selectors}
        for W in clarke_selector_grid(
            partition, config.beta_grid_resolution, config.clarke_grid_cap
        ):
            if W.values not in known:
                selectors.append(W)
                known.add(W.values)

    gset = GeneralizedDerivativeSet(kind="outer_approx")
    n_singular = 0
    for W in selectors:
        try:
            H = assemble_h_matrix(spec, sol, W)
        except SingularMatrixError as exc:
            n_singular += 1
            gset.errors.append((W, str(exc)))
            continue
        r = lag.grad_x - H.T @ stack
        gset.items.append((W, r))
        A_eq, b_eq, lower, nvar = _lambda_lp_parts(data, aset.I, r)
        if nvar == 0:
            feasible = float(np.max(np.abs(r), initial=0.0)) <= config.tol_kkt
            if feasible:
                check = ConditionCheck(
                    "first_order_nonsmooth", SATISFIED,
                    float(np.max(np.abs(r), initial=0.0)), config.tol_kkt,
                    kind=KIND_NECESSARY,
                    witness={"W": list(W.values), "u": [], "v": [0.0] * spec.n2},
                )
                return check, gset
            continue
        lp = solve_lp(LpProblem(np.zeros(nvar), A_eq, b_eq, None, None, lower, None))
        if lp.status == "optimal":
            u = lp.z[: spec.n1]
            v = np.zeros(spec.n2)
            for j, i in enumerate(aset.I):
                v[i] = max(lp.z[spec.n1 + j], 0.0)
            check = ConditionCheck(
                "first_order_nonsmooth", SATISFIED,
                float(np.max(np.abs(data.JH.T @ u + data.JG.T @ v + r), initial=0.0)),
                config.tol_kkt,
                kind=KIND_NECESSARY,
                witness={"W": list(W.values), "u": u.tolist(), "v": v.tolist()},
            )
            return check, gset
    if n_singular == len(selectors):
        check = ConditionCheck(
            "first_order_nonsmooth", ERROR, None, config.tol_kkt,
            kind=KIND_NECESSARY,
            detail="every selector matrix was singular: inconsistent with the "
            "standing regularity assumption",
        )
        return check, gset
    if exact_family:
        dist = min(
            (float(np.max(np.abs(r))) for _, r in gset.items), default=np.inf
        )
        check = ConditionCheck(
            "first_order_nonsmooth", VIOLATED, dist, config.tol_kkt,
            kind=KIND_NECESSARY,
            detail="selector family is exact here and no multiplier exists",
        )
        return check, gset
    check = ConditionCheck(
        "first_order_nonsmooth", NOT_FOUND_SAMPLED, None, config.tol_kkt,
        kind=KIND_NECESSARY,
        detail=f"no admissible selector among {len(selectors)} samples; "
        "not a disproof",
    )
    return check, gset
