"""Value function of the inner maximization on the smooth path: phi(x) =
f(x, y(x)) with gradient grad_x L and Hessian from the squared-slack
sensitivity system (the bordered matrix K and cross-derivative stack N).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import CheckConfig
from .linalg import PLUFactors, SingularMatrixError, plu
from .lower import KktSolution, lagrangian_eval
from .problem import ProblemSpec, eval_bundle

SMOOTH_RESIDUAL_TOL = 1e-8
HESSIAN_SYM_TOL = 1e-8


class SingularSensitivityError(Exception):
    """K(x) singular to tolerance: the smooth-path hypotheses fail here."""

    def __init__(self, pivot: float):
        self.pivot = pivot
        super().__init__(
            f"sensitivity matrix K is singular to tolerance (pivot {pivot:.3e}); "
            "Jacobian uniqueness cannot hold at this solution"
        )


@dataclass
class SensitivitySystem:
    """K (order m + m2 + m1 + m2) and N (same rows, n columns) with the block
    layout recorded; K uses the symmetric display with slacks w = sqrt(-g)."""

    K: np.ndarray
    N: np.ndarray
    blocks: dict[str, slice]
    min_pivot: float
    condition: float
    condition_warning: bool
    _factors: PLUFactors

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._factors.solve(rhs)


def assemble_sensitivity_system(
    spec: ProblemSpec, sol: KktSolution, config: CheckConfig | None = None
) -> SensitivitySystem:
    config = config or CheckConfig()
    if sol.path != "smooth":
        raise ValueError("sensitivity system requires a smooth-path solution")
    if sol.residual > SMOOTH_RESIDUAL_TOL:
        raise ValueError(
            f"solution residual {sol.residual:.3e} exceeds {SMOOTH_RESIDUAL_TOL:.1e}"
        )
    bundle = eval_bundle(spec, sol.x, sol.y)
    lag = lagrangian_eval(bundle, sol.mu, sol.lam)
    m, m1, m2, n = spec.m, spec.m1, spec.m2, spec.n
    size = m + m2 + m1 + m2
    sl_y = slice(0, m)
    sl_w = slice(m, m + m2)
    sl_mu = slice(m + m2, m + m2 + m1)
    sl_lam = slice(m + m2 + m1, size)
    w = sol.w
    K = np.zeros((size, size))
    K[sl_y, sl_y] = lag.yy
    K[sl_y, sl_mu] = bundle.h_jy.T
    K[sl_y, sl_lam] = bundle.g_jy.T
    K[sl_mu, sl_y] = bundle.h_jy
    if m2:
        K[sl_w, sl_w] = np.diag(-2.0 * sol.lam)
        K[sl_w, sl_lam] = np.diag(2.0 * w)
        K[sl_lam, sl_y] = bundle.g_jy
        K[sl_lam, sl_w] = np.diag(2.0 * w)
    N = np.zeros((size, n))
    N[sl_y] = lag.yx
    N[sl_mu] = bundle.h_jx
    if m2:
        N[sl_lam] = bundle.g_jx
    try:
        factors = plu(K)
    except SingularMatrixError as exc:
        raise SingularSensitivityError(exc.pivot) from exc
    condition = float(np.linalg.cond(K, 1)) if size else 1.0
    return SensitivitySystem(
        K=K,
        N=N,
        blocks={"y": sl_y, "w": sl_w, "mu": sl_mu, "lam": sl_lam},
        min_pivot=factors.min_pivot,
        condition=condition,
        condition_warning=condition > config.cond_warn,
        _factors=factors,
    )


def phi_value(spec: ProblemSpec, sol: KktSolution) -> float:
    return eval_bundle(spec, sol.x, sol.y).f


def phi_gradient(spec: ProblemSpec, sol: KktSolution) -> np.ndarray:
    """grad phi(x) = grad_x L(x; y(x), mu(x), lam(x))."""
    if sol.residual > SMOOTH_RESIDUAL_TOL:
        raise ValueError(
            f"solution residual {sol.residual:.3e} exceeds {SMOOTH_RESIDUAL_TOL:.1e}"
        )
    bundle = eval_bundle(spec, sol.x, sol.y)
    return lagrangian_eval(bundle, sol.mu, sol.lam).grad_x


def phi_hessian(
    spec: ProblemSpec,
    sol: KktSolution,
    system: SensitivitySystem | None = None,
) -> np.ndarray:
    """hess phi(x) = grad_xx L - N^T K^{-1} N, symmetrized on return."""
    if system is None:
        system = assemble_sensitivity_system(spec, sol)
    bundle = eval_bundle(spec, sol.x, sol.y)
    lag = lagrangian_eval(bundle, sol.mu, sol.lam)
    correction = system.N.T @ system.solve(system.N)
    hess = lag.xx - correction
    asym = float(np.max(np.abs(hess - hess.T), initial=0.0))
    if asym > HESSIAN_SYM_TOL:
        raise ValueError(f"value-function Hessian asymmetry {asym:.3e} exceeds 1e-8")
    return 0.5 * (hess + hess.T)


@dataclass
class ValueDerivatives:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray
    hessian_asymmetry: float
    system: SensitivitySystem


def value_derivatives(
    spec: ProblemSpec, sol: KktSolution, config: CheckConfig | None = None
) -> ValueDerivatives:
    """phi, grad phi, hess phi with the assembled sensitivity system."""
    system = assemble_sensitivity_system(spec, sol, config)
    bundle = eval_bundle(spec, sol.x, sol.y)
    lag = lagrangian_eval(bundle, sol.mu, sol.lam)
    correction = system.N.T @ system.solve(system.N)
    raw = lag.xx - correction
    asym = float(np.max(np.abs(raw - raw.T), initial=0.0))
    if asym > HESSIAN_SYM_TOL:
        raise ValueError(f"value-function Hessian asymmetry {asym:.3e} exceeds 1e-8")
    return ValueDerivatives(
        value=bundle.f,
        gradient=lag.grad_x,
        hessian=0.5 * (raw + raw.T),
        hessian_asymmetry=asym,
        system=system,
    )
