"""Inner maximization analysis: KKT residuals, active-set partitions,
constraint qualifications, second-order conditions, and Newton solvers for the
parametric solution map (squared-slack and semismooth variants).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conditions import (
    INCONCLUSIVE,
    SATISFIED,
    VIOLATED,
    ConditionCheck,
)
from .config import CheckConfig
from .cones import cone_contains, sample_cone
from .linalg import (
    SingularMatrixError,
    max_eigenvalue_on_subspace,
    nullspace_basis,
    smallest_singular_value,
    solve_linear,
)
from .problem import DerivativeBundle, ProblemSpec, eval_bundle

NULLSPACE_TOL = 1e-10


class PartitionError(Exception):
    """An index fits none of the (alpha, beta, gamma) classes."""


class NewtonError(Exception):
    def __init__(self, message: str, trace: list[float] | None = None):
        self.trace = trace or []
        super().__init__(message)


@dataclass
class LagrangianEval:
    """L(x; y, mu, lam) = f + mu^T h - lam^T g and its blocks at one point."""

    value: float
    grad_y: np.ndarray
    grad_x: np.ndarray
    yy: np.ndarray
    yx: np.ndarray
    xx: np.ndarray


def lagrangian_eval(bundle: DerivativeBundle, mu: np.ndarray, lam: np.ndarray) -> LagrangianEval:
    mu = np.asarray(mu, dtype=float).reshape(-1)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    value = bundle.f + float(mu @ bundle.h) - float(lam @ bundle.g)
    grad_y = bundle.fy + bundle.h_jy.T @ mu - bundle.g_jy.T @ lam
    grad_x = bundle.fx + bundle.h_jx.T @ mu - bundle.g_jx.T @ lam
    yy = bundle.fyy + np.einsum("k,kij->ij", mu, bundle.h_yy) - np.einsum(
        "k,kij->ij", lam, bundle.g_yy
    )
    yx = bundle.fyx + np.einsum("k,kij->ij", mu, bundle.h_yx) - np.einsum(
        "k,kij->ij", lam, bundle.g_yx
    )
    xx = bundle.fxx + np.einsum("k,kij->ij", mu, bundle.h_xx) - np.einsum(
        "k,kij->ij", lam, bundle.g_xx
    )
    return LagrangianEval(value=value, grad_y=grad_y, grad_x=grad_x, yy=yy, yx=yx, xx=xx)


def kkt_residual_lower(spec: ProblemSpec, x, y, mu, lam) -> tuple[np.ndarray, float]:
    """Stacked residual (grad_y L; h; g - Pi_{<=0}(lam + g)) and its inf-norm."""
    bundle = eval_bundle(spec, x, y)
    return kkt_residual_from_bundle(bundle, mu, lam)


def kkt_residual_from_bundle(bundle: DerivativeBundle, mu, lam) -> tuple[np.ndarray, float]:
    lag = lagrangian_eval(bundle, mu, lam)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    proj = np.minimum(lam + bundle.g, 0.0)
    residual = np.concatenate([lag.grad_y, bundle.h, bundle.g - proj])
    norm = float(np.max(np.abs(residual), initial=0.0))
    return residual, norm


@dataclass
class ActivePartition:
    """Active-set split: alpha (active, positive multiplier), beta (active,
    zero multiplier), gamma (inactive, zero multiplier)."""

    alpha: tuple[int, ...]
    beta: tuple[int, ...]
    gamma: tuple[int, ...]
    tol_act: float

    @property
    def active(self) -> tuple[int, ...]:
        return tuple(sorted(self.alpha + self.beta))

    @property
    def size(self) -> int:
        return len(self.alpha) + len(self.beta) + len(self.gamma)


def classify_partition(g: np.ndarray, lam: np.ndarray, tol_act: float) -> ActivePartition:
    g = np.asarray(g, dtype=float).reshape(-1)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if g.shape != lam.shape:
        raise ValueError("g and lam must have equal lengths")
    alpha, beta, gamma = [], [], []
    for i in range(g.shape[0]):
        if g[i] > tol_act:
            raise PartitionError(f"index {i + 1}: infeasible inequality g = {g[i]:.3e} > 0")
        if lam[i] < -tol_act:
            raise PartitionError(f"index {i + 1}: negative multiplier {lam[i]:.3e}")
        if abs(g[i]) <= tol_act:
            (alpha if lam[i] > tol_act else beta).append(i)
        else:
            if lam[i] > tol_act:
                raise PartitionError(
                    f"index {i + 1}: inactive (g = {g[i]:.3e}) with positive "
                    f"multiplier {lam[i]:.3e}"
                )
            gamma.append(i)
    return ActivePartition(tuple(alpha), tuple(beta), tuple(gamma), tol_act)


@dataclass
class ConeRep:
    """Polyhedral cone rows: E d = 0, F d <= 0; aff rows span its affine hull.

    literal_E / literal_F keep the unreduced form (all active gradients with
    the objective-gradient row) for cross-validation.
    """

    E: np.ndarray
    F: np.ndarray
    aff_rows: np.ndarray
    literal_E: np.ndarray
    literal_F: np.ndarray
    dim: int

    def contains(self, d: np.ndarray, tol: float = 1e-9) -> bool:
        return cone_contains(self.E, self.F, d, tol)

    def contains_literal(self, d: np.ndarray, tol: float = 1e-9) -> bool:
        return cone_contains(self.literal_E, self.literal_F, d, tol)


def critical_cone_lower(
    spec: ProblemSpec,
    x,
    y,
    mu,
    lam,
    partition: ActivePartition,
    tol_kkt: float = 1e-8,
) -> ConeRep:
    """Critical cone of the inner problem in reduced form (stationarity makes
    the objective-gradient row redundant: equalities on alpha, inequalities on
    beta)."""
    bundle = eval_bundle(spec, x, y)
    _, norm = kkt_residual_from_bundle(bundle, mu, lam)
    if norm > tol_kkt:
        raise ValueError(f"not a KKT point: residual {norm:.3e} > {tol_kkt:.1e}")
    m = spec.m
    E_rows = [bundle.h_jy]
    if partition.alpha:
        E_rows.append(bundle.g_jy[list(partition.alpha)])
    E = np.vstack(E_rows) if any(r.size for r in E_rows) else np.zeros((0, m))
    F = (
        bundle.g_jy[list(partition.beta)]
        if partition.beta
        else np.zeros((0, m))
    )
    active = list(partition.active)
    lit_F_rows = []
    if active:
        lit_F_rows.append(bundle.g_jy[active])
    lit_F_rows.append(bundle.fy.reshape(1, -1))
    literal_F = np.vstack(lit_F_rows)
    return ConeRep(
        E=E,
        F=F,
        aff_rows=E,
        literal_E=bundle.h_jy,
        literal_F=literal_F,
        dim=m,
    )


@dataclass
class RecoveredMultipliers:
    mu: np.ndarray
    lam: np.ndarray
    residual: float
    licq_sigma_min: float
    active: tuple[int, ...]
    is_kkt: bool
    detail: str = ""


def recover_multipliers(spec: ProblemSpec, x, y, tol_act: float = 1e-8) -> RecoveredMultipliers:
    """Least-squares multipliers from stationarity over the active set."""
    bundle = eval_bundle(spec, x, y)
    active = [i for i in range(spec.m2) if abs(bundle.g[i]) <= tol_act]
    feas_notes = []
    if np.any(bundle.g > tol_act):
        feas_notes.append("inequality infeasible")
    if bundle.h.size and float(np.max(np.abs(bundle.h))) > tol_act:
        feas_notes.append("equality infeasible")
    cols = []
    if spec.m1:
        cols.append(bundle.h_jy.T)
    if active:
        cols.append(-bundle.g_jy[active].T)
    mu = np.zeros(spec.m1)
    lam = np.zeros(spec.m2)
    if cols:
        M = np.hstack(cols)
        z, *_ = np.linalg.lstsq(M, -bundle.fy, rcond=None)
        mu = z[: spec.m1]
        for j, i in enumerate(active):
            lam[i] = z[spec.m1 + j]
    grads = [bundle.h_jy] + ([bundle.g_jy[active]] if active else [])
    stacked = np.vstack(grads) if any(g.size for g in grads) else np.zeros((0, spec.m))
    sigma = smallest_singular_value(stacked)
    _, norm = kkt_residual_from_bundle(bundle, mu, lam)
    neg = float(np.min(lam[active], initial=0.0)) if active else 0.0
    is_kkt = norm <= tol_act and neg >= -tol_act and not feas_notes
    detail = "; ".join(feas_notes)
    if neg < -tol_act:
        detail = (detail + "; " if detail else "") + "negative recovered multiplier"
    return RecoveredMultipliers(
        mu=mu,
        lam=np.maximum(lam, 0.0) if is_kkt else lam,
        residual=norm,
        licq_sigma_min=sigma,
        active=tuple(active),
        is_kkt=is_kkt,
        detail=detail,
    )


@dataclass
class LowerConditionsReport:
    """Verdicts for the inner problem at a candidate, with numeric evidence."""

    checks: dict[str, ConditionCheck]
    partition: ActivePartition | None = None
    cone: ConeRep | None = None
    mu: np.ndarray | None = None
    lam: np.ndarray | None = None

    def status(self, name: str) -> str:
        return self.checks[name].status

    def all_satisfied(self, names) -> bool:
        return all(name in self.checks and self.checks[name].ok for name in names)

    @property
    def jacobian_uniqueness(self) -> bool:
        return self.all_satisfied(("kkt", "licq", "strict_complementarity", "sosc"))

    @property
    def assumption_a(self) -> bool:
        return self.all_satisfied(("multipliers_exist", "licq", "strong_sosc"))


def _require_smooth(spec: ProblemSpec):
    if not spec.smooth_for_conditions:
        raise ValueError(
            "problem uses abs(); condition checks require twice continuously "
            "differentiable data"
        )


def check_jacobian_uniqueness(
    spec: ProblemSpec, x, y, mu, lam, config: CheckConfig | None = None
) -> LowerConditionsReport:
    """Def-style check of (a) KKT, (b) LICQ, (c) strict complementarity,
    (d) second-order sufficiency on the critical cone."""
    config = config or CheckConfig()
    _require_smooth(spec)
    bundle = eval_bundle(spec, x, y)
    mu = np.zeros(spec.m1) if mu is None else np.asarray(mu, dtype=float).reshape(-1)
    lam = np.zeros(spec.m2) if lam is None else np.asarray(lam, dtype=float).reshape(-1)
    checks: dict[str, ConditionCheck] = {}
    _, norm = kkt_residual_from_bundle(bundle, mu, lam)
    kkt_ok = norm <= config.tol_kkt
    checks["kkt"] = ConditionCheck(
        "kkt", SATISFIED if kkt_ok else VIOLATED, norm, config.tol_kkt
    )
    if not kkt_ok:
        for name in ("licq", "strict_complementarity", "sosc"):
            checks[name] = ConditionCheck(
                name, INCONCLUSIVE, None, None, detail="kkt residual too large"
            )
        return LowerConditionsReport(checks=checks, mu=mu, lam=lam)

    partition = classify_partition(bundle.g, lam, config.tol_act)
    active = list(partition.active)
    rows = [bundle.h_jy] + ([bundle.g_jy[active]] if active else [])
    stacked = np.vstack(rows) if any(r.size for r in rows) else np.zeros((0, spec.m))
    sigma = smallest_singular_value(stacked)
    checks["licq"] = ConditionCheck(
        "licq", SATISFIED if sigma >= config.tol_licq else VIOLATED, sigma, config.tol_licq
    )

    margin = (
        float(np.min(lam - bundle.g)) if spec.m2 else np.inf
    )
    sc_ok = margin >= config.tol_sc
    checks["strict_complementarity"] = ConditionCheck(
        "strict_complementarity", SATISFIED if sc_ok else VIOLATED, margin, config.tol_sc
    )

    lag = lagrangian_eval(bundle, mu, lam)
    cone = critical_cone_lower(spec, x, y, mu, lam, partition, config.tol_kkt)
    if not partition.beta:
        basis = nullspace_basis(cone.E, NULLSPACE_TOL) if cone.E.size else np.eye(spec.m)
        if cone.E.shape[0] == 0:
            basis = np.eye(spec.m)
        maxeig = max_eigenvalue_on_subspace(lag.yy, basis)
        checks["sosc"] = ConditionCheck(
            "sosc",
            SATISFIED if maxeig <= -config.tol_pd else VIOLATED,
            maxeig,
            config.tol_pd,
        )
    else:
        # genuine cone: liberal affine-hull test, then sampled witness search
        basis = nullspace_basis(cone.aff_rows, NULLSPACE_TOL) if cone.aff_rows.size else np.eye(spec.m)
        if cone.aff_rows.shape[0] == 0:
            basis = np.eye(spec.m)
        maxeig_aff = max_eigenvalue_on_subspace(lag.yy, basis)
        if maxeig_aff <= -config.tol_pd:
            checks["sosc"] = ConditionCheck(
                "sosc", SATISFIED, maxeig_aff, config.tol_pd,
                detail="negative definite on aff C",
            )
        else:
            samples = sample_cone(
                cone.E, cone.F, spec.m, config.sosc_cone_samples, config.seed
            )
            worst = -np.inf
            witness = None
            for d in samples:
                val = float(d @ lag.yy @ d)
                if val > worst:
                    worst = val
                    witness = d
            if worst >= config.tol_pd:
                checks["sosc"] = ConditionCheck(
                    "sosc", VIOLATED, worst, config.tol_pd,
                    witness=None if witness is None else witness.tolist(),
                    detail="positive curvature direction in the critical cone",
                )
            else:
                checks["sosc"] = ConditionCheck(
                    "sosc", INCONCLUSIVE, maxeig_aff, config.tol_pd,
                    detail=(
                        "aff-hull test failed but no sampled violation "
                        f"(sampled max {worst:.3e} over {len(samples)} directions)"
                    ),
                )
    return LowerConditionsReport(checks=checks, partition=partition, cone=cone, mu=mu, lam=lam)


def check_assumption_a(
    spec: ProblemSpec, x, y, config: CheckConfig | None = None
) -> LowerConditionsReport:
    """Nonempty multiplier set + LICQ + strong SOSC on the affine hull of the
    critical cone.  LICQ makes the multiplier set a singleton, so the sup in
    the strong condition is a single evaluation."""
    config = config or CheckConfig()
    _require_smooth(spec)
    bundle = eval_bundle(spec, x, y)
    rec = recover_multipliers(spec, x, y, config.tol_act)
    checks: dict[str, ConditionCheck] = {}
    checks["multipliers_exist"] = ConditionCheck(
        "multipliers_exist",
        SATISFIED if rec.is_kkt else VIOLATED,
        rec.residual,
        config.tol_kkt,
        detail=rec.detail,
    )
    checks["licq"] = ConditionCheck(
        "licq",
        SATISFIED if rec.licq_sigma_min >= config.tol_licq else VIOLATED,
        rec.licq_sigma_min,
        config.tol_licq,
    )
    partition = None
    cone = None
    if rec.is_kkt:
        partition = classify_partition(bundle.g, rec.lam, config.tol_act)
        lag = lagrangian_eval(bundle, rec.mu, rec.lam)
        cone = critical_cone_lower(spec, x, y, rec.mu, rec.lam, partition, config.tol_kkt)
        rows = cone.aff_rows
        basis = nullspace_basis(rows, NULLSPACE_TOL) if rows.size else np.eye(spec.m)
        if rows.shape[0] == 0:
            basis = np.eye(spec.m)
        maxeig = max_eigenvalue_on_subspace(lag.yy, basis)
        checks["strong_sosc"] = ConditionCheck(
            "strong_sosc",
            SATISFIED if maxeig <= -config.tol_pd else VIOLATED,
            maxeig,
            config.tol_pd,
        )
    else:
        checks["strong_sosc"] = ConditionCheck(
            "strong_sosc", INCONCLUSIVE, None, config.tol_pd,
            detail="no KKT multipliers recovered",
        )
    return LowerConditionsReport(
        checks=checks, partition=partition, cone=cone, mu=rec.mu, lam=rec.lam
    )


# ---------------------------------------------------------------------------
# Newton solvers for the parametric solution map


@dataclass
class KktSolution:
    """Inner KKT triple at one x, with slacks w_i = sqrt(-g_i) at solutions."""

    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    residual: float
    path: str  # 'smooth' | 'nonsmooth'
    trace: list[float] = field(default_factory=list)
    iterations: int = 0
    notes: str = ""


def kkt_jacobian_blocks(lag: LagrangianEval, bundle: DerivativeBundle, w_diag: np.ndarray):
    """Exact derivative of the projected KKT map w.r.t. (y, mu, lam) for a
    fixed projection selector W = Diag(w_diag): rows (stationarity; h; g-proj)."""
    m, m1, m2 = lag.yy.shape[0], bundle.h.shape[0], bundle.g.shape[0]
    size = m + m1 + m2
    A = np.zeros((size, size))
    A[:m, :m] = lag.yy
    A[:m, m : m + m1] = bundle.h_jy.T
    A[:m, m + m1 :] = -bundle.g_jy.T
    A[m : m + m1, :m] = bundle.h_jy
    if m2:
        A[m + m1 :, :m] = (1.0 - w_diag)[:, None] * bundle.g_jy
        A[m + m1 :, m + m1 :] = -np.diag(w_diag)
    return A


def _squared_slack_newton(spec, x, y0, w0, mu0, lam0, config):
    m, m1, m2 = spec.m, spec.m1, spec.m2
    y = np.array(y0, dtype=float)
    w = np.array(w0, dtype=float)
    mu = np.array(mu0, dtype=float)
    lam = np.array(lam0, dtype=float)
    trace: list[float] = []
    size = m + m2 + m1 + m2
    for it in range(config.newton_max_iter):
        bundle = eval_bundle(spec, x, y)
        lag = lagrangian_eval(bundle, mu, lam)
        T = np.concatenate([lag.grad_y, -2.0 * lam * w, bundle.h, bundle.g + w * w])
        res = float(np.max(np.abs(T), initial=0.0))
        trace.append(res)
        if res <= config.tol_newton:
            return y, w, mu, lam, trace
        if not np.isfinite(res) or (len(trace) > 3 and res > 1e8 * (1.0 + trace[0])):
            raise NewtonError(f"divergence at iteration {it} (residual {res:.3e})", trace)
        J = np.zeros((size, size))
        sl_y = slice(0, m)
        sl_w = slice(m, m + m2)
        sl_mu = slice(m + m2, m + m2 + m1)
        sl_lam = slice(m + m2 + m1, size)
        J[sl_y, sl_y] = lag.yy
        J[sl_y, sl_mu] = bundle.h_jy.T
        J[sl_y, sl_lam] = -bundle.g_jy.T
        if m2:
            J[sl_w, sl_w] = np.diag(-2.0 * lam)
            J[sl_w, sl_lam] = np.diag(-2.0 * w)
            J[sl_lam, sl_y] = bundle.g_jy
            J[sl_lam, sl_w] = np.diag(2.0 * w)
        J[sl_mu, sl_y] = bundle.h_jy
        try:
            delta = solve_linear(J, -T)
        except SingularMatrixError as exc:
            raise NewtonError(f"singular Newton matrix: {exc}", trace) from exc
        y = y + delta[sl_y]
        w = w + delta[sl_w]
        mu = mu + delta[sl_mu]
        lam = lam + delta[sl_lam]
    raise NewtonError(
        f"no convergence in {config.newton_max_iter} iterations "
        f"(last residual {trace[-1]:.3e})",
        trace,
    )


def _semismooth_newton(spec, x, y0, mu0, lam0, config):
    m, m1, m2 = spec.m, spec.m1, spec.m2
    y = np.array(y0, dtype=float)
    mu = np.array(mu0, dtype=float)
    lam = np.array(lam0, dtype=float)
    trace: list[float] = []
    for it in range(config.newton_max_iter):
        bundle = eval_bundle(spec, x, y)
        lag = lagrangian_eval(bundle, mu, lam)
        proj = np.minimum(lam + bundle.g, 0.0)
        F = np.concatenate([lag.grad_y, bundle.h, bundle.g - proj])
        res = float(np.max(np.abs(F), initial=0.0))
        trace.append(res)
        if res <= config.tol_newton:
            return y, mu, lam, trace
        if not np.isfinite(res) or (len(trace) > 3 and res > 1e8 * (1.0 + trace[0])):
            raise NewtonError(f"divergence at iteration {it} (residual {res:.3e})", trace)
        w_diag = (lam + bundle.g < 0.0).astype(float) if m2 else np.zeros(0)
        A = kkt_jacobian_blocks(lag, bundle, w_diag)
        try:
            delta = solve_linear(A, -F)
        except SingularMatrixError as exc:
            raise NewtonError(f"singular semismooth Newton matrix: {exc}", trace) from exc
        y = y + delta[:m]
        mu = mu + delta[m : m + m1]
        lam = lam + delta[m + m1 :]
    raise NewtonError(
        f"no convergence in {config.newton_max_iter} iterations "
        f"(last residual {trace[-1]:.3e})",
        trace,
    )


def solve_lower(
    spec: ProblemSpec,
    x,
    seed: tuple,
    config: CheckConfig | None = None,
    path: str = "smooth",
) -> KktSolution:
    """Solve the inner KKT system at x from a seed (y0, mu0, lam0).

    path='smooth' runs Newton on the squared-slack system (with a semismooth
    rescue when the seed is outside its basin); path='nonsmooth' runs the
    semismooth Newton on the projected system directly.
    """
    config = config or CheckConfig()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y0, mu0, lam0 = seed
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    mu0 = np.zeros(spec.m1) if mu0 is None else np.atleast_1d(np.asarray(mu0, dtype=float))
    lam0 = np.zeros(spec.m2) if lam0 is None else np.atleast_1d(np.asarray(lam0, dtype=float))
    notes = ""

    if path == "nonsmooth":
        y, mu, lam, trace = _semismooth_newton(spec, x, y0, mu0, lam0, config)
        bundle = eval_bundle(spec, x, y)
        w = np.sqrt(np.maximum(0.0, -bundle.g))
        _, norm = kkt_residual_from_bundle(bundle, mu, lam)
        return KktSolution(x, y, w, mu, lam, norm, "nonsmooth", trace, len(trace), notes)

    if path != "smooth":
        raise ValueError(f"unknown path {path!r}")

    bundle0 = eval_bundle(spec, x, y0)
    w0 = np.sqrt(np.maximum(config.slack_floor, -np.minimum(bundle0.g, 0.0)))
    try:
        y, w, mu, lam, trace = _squared_slack_newton(spec, x, y0, w0, mu0, lam0, config)
    except NewtonError:
        # rescue: identify the active set semismoothly, then polish
        y1, mu1, lam1, trace1 = _semismooth_newton(spec, x, y0, mu0, lam0, config)
        bundle1 = eval_bundle(spec, x, y1)
        w1 = np.sqrt(np.maximum(config.slack_floor, -np.minimum(bundle1.g, 0.0)))
        y, w, mu, lam, trace2 = _squared_slack_newton(spec, x, y1, w1, mu1, lam1, config)
        trace = trace1 + trace2
        notes = "squared-slack Newton restarted from a semismooth solve"
    w = np.abs(w)
    bundle = eval_bundle(spec, x, y)
    _, norm = kkt_residual_from_bundle(bundle, mu, lam)
    return KktSolution(x, y, w, mu, lam, norm, "smooth", trace, len(trace), notes)
