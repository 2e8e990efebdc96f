"""Nonsmooth-path machinery: projection selectors, the bordered matrices
A(x,W), the solution-map sensitivity blocks H(x,W), and the resulting
directional-derivative / subgradient candidate sets.

Sign convention: A is assembled as the exact x-derivative of the projected
KKT map (the lambda column carries -J_y g^T and -W).  Relative to the
symmetric display convention this negates the lambda column; candidate
(y', mu', lambda') vectors from binary selectors then equal the one-sided
derivatives of the tracked solution path, which finite differences confirm.
The convention is recorded in reports as LAMBDA_SIGN_CONVENTION.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .config import CheckConfig
from .linalg import SingularMatrixError, plu, smallest_pivot
from .lower import (
    ActivePartition,
    KktSolution,
    kkt_jacobian_blocks,
    lagrangian_eval,
)
from .problem import ProblemSpec, eval_bundle

LAMBDA_SIGN_CONVENTION = "kkt-derivative (lambda column negated, sigma = -1)"


class SelectorCapError(Exception):
    pass


def project_nonpositive(v: np.ndarray) -> np.ndarray:
    """Componentwise projection onto the nonpositive orthant: min(v, 0)."""
    return np.minimum(np.asarray(v, dtype=float), 0.0)


@dataclass(frozen=True)
class WSelector:
    """Diagonal selector from the generalized Jacobian of the projection:
    0 on alpha, 1 on gamma, [0,1] (binary for B-elements) on beta."""

    values: tuple[float, ...]
    provenance: tuple[str, ...]
    binary: bool

    def __post_init__(self):
        for v, tag in zip(self.values, self.provenance):
            if tag == "alpha" and v != 0.0:
                raise ValueError("selector must be 0 on alpha")
            if tag == "gamma" and v != 1.0:
                raise ValueError("selector must be 1 on gamma")
            if not 0.0 <= v <= 1.0:
                raise ValueError("selector entries must lie in [0, 1]")
            if self.binary and tag == "beta" and v not in (0.0, 1.0):
                raise ValueError("B-subdifferential selectors are binary on beta")

    @property
    def diag(self) -> np.ndarray:
        return np.array(self.values, dtype=float)


def _base_selector(partition: ActivePartition) -> tuple[list[float], list[str]]:
    values = [0.0] * partition.size
    tags = ["alpha"] * partition.size
    for i in partition.beta:
        tags[i] = "beta"
    for i in partition.gamma:
        values[i] = 1.0
        tags[i] = "gamma"
    return values, tags


def enumerate_b_selectors(
    partition: ActivePartition, cap: int = 16
) -> list[WSelector]:
    """All 2^|beta| binary selectors, beta-subset bitmask ascending."""
    beta = list(partition.beta)
    if len(beta) > cap:
        raise SelectorCapError(f"|beta| = {len(beta)} exceeds cap {cap}")
    values, tags = _base_selector(partition)
    out = []
    for mask in range(1 << len(beta)):
        vals = list(values)
        for bit, idx in enumerate(beta):
            vals[idx] = 1.0 if (mask >> bit) & 1 else 0.0
        out.append(WSelector(tuple(vals), tuple(tags), binary=True))
    return out


def clarke_selector_grid(
    partition: ActivePartition, resolution: int = 5, cap: int = 4096
) -> list[WSelector]:
    """Grid sample of the Clarke box: `resolution` points per beta index."""
    beta = list(partition.beta)
    count = resolution ** len(beta)
    if count > cap:
        raise SelectorCapError(f"{count} grid selectors exceed cap {cap}")
    values, tags = _base_selector(partition)
    levels = np.linspace(0.0, 1.0, resolution)
    out = []
    for combo in product(levels, repeat=len(beta)):
        vals = list(values)
        for idx, v in zip(beta, combo):
            vals[idx] = float(v)
        out.append(WSelector(tuple(vals), tuple(tags), binary=False))
    return out


def assemble_a_matrix(spec: ProblemSpec, sol: KktSolution, W: WSelector) -> np.ndarray:
    """Bordered matrix of order m + m1 + m2 for the selector W."""
    if sol.residual > 1e-8:
        raise ValueError(f"solution residual {sol.residual:.3e} exceeds 1e-8")
    bundle = eval_bundle(spec, sol.x, sol.y)
    lag = lagrangian_eval(bundle, sol.mu, sol.lam)
    return kkt_jacobian_blocks(lag, bundle, W.diag)


def a_matrix_min_pivot(spec: ProblemSpec, sol: KktSolution, W: WSelector) -> float:
    return smallest_pivot(assemble_a_matrix(spec, sol, W))


def _rhs_stack(spec: ProblemSpec, sol: KktSolution, W: WSelector) -> np.ndarray:
    bundle = eval_bundle(spec, sol.x, sol.y)
    lag = lagrangian_eval(bundle, sol.mu, sol.lam)
    rows = [lag.yx, bundle.h_jx]
    if spec.m2:
        rows.append((1.0 - W.diag)[:, None] * bundle.g_jx)
    else:
        rows.append(np.zeros((0, spec.n)))
    return np.vstack(rows)


def assemble_h_matrix(spec: ProblemSpec, sol: KktSolution, W: WSelector) -> np.ndarray:
    """H(x, W) = A(x, W)^{-1} (grad_yx L; J_x h; (I - W) J_x g)."""
    A = assemble_a_matrix(spec, sol, W)
    rhs = _rhs_stack(spec, sol, W)
    factors = plu(A)
    return factors.solve(rhs)


@dataclass
class GeneralizedDerivativeSet:
    """Per-selector candidates; kind tags which object they approximate."""

    kind: str  # 'directional' | 'b_subdifferential' | 'clarke_sample' | 'outer_approx'
    items: list[tuple[WSelector, np.ndarray]] = field(default_factory=list)
    errors: list[tuple[WSelector, str]] = field(default_factory=list)

    @property
    def vectors(self) -> list[np.ndarray]:
        return [v for _, v in self.items]

    def closest_to(self, target: np.ndarray) -> tuple[float, np.ndarray | None]:
        best = np.inf
        best_vec = None
        for _, v in self.items:
            dist = float(np.max(np.abs(v - target)))
            if dist < best:
                best = dist
                best_vec = v
        return best, best_vec


def kkt_map_directional(
    spec: ProblemSpec,
    sol: KktSolution,
    d_x: np.ndarray,
    config: CheckConfig | None = None,
    partition: ActivePartition | None = None,
) -> GeneralizedDerivativeSet:
    """Candidate one-sided derivatives (y'; mu'; lambda') along d_x, one per
    binary selector.  The true directional derivative is a member."""
    config = config or CheckConfig()
    d_x = np.atleast_1d(np.asarray(d_x, dtype=float))
    partition = partition or _partition_of(spec, sol, config)
    selectors = enumerate_b_selectors(partition, config.selector_cap)
    out = GeneralizedDerivativeSet(kind="directional")
    for W in selectors:
        try:
            A = assemble_a_matrix(spec, sol, W)
            factors = plu(A)
        except SingularMatrixError as exc:
            out.errors.append((W, str(exc)))
            continue
        rhs = _rhs_stack(spec, sol, W) @ d_x
        out.items.append((W, -factors.solve(rhs)))
    return out


def phi_generalized_gradients(
    spec: ProblemSpec,
    sol: KktSolution,
    config: CheckConfig | None = None,
    kind: str = "b_subdifferential",
    partition: ActivePartition | None = None,
) -> GeneralizedDerivativeSet:
    """Candidate gradients grad_x L - H(x,W)^T grad_{(y,mu,lam)} L per selector.

    kind='b_subdifferential' enumerates binary selectors; kind='outer_approx'
    additionally samples the Clarke box on a beta-grid.
    """
    config = config or CheckConfig()
    partition = partition or _partition_of(spec, sol, config)
    if kind == "b_subdifferential":
        selectors = enumerate_b_selectors(partition, config.selector_cap)
    elif kind == "outer_approx":
        selectors = enumerate_b_selectors(partition, config.selector_cap)
        for W in clarke_selector_grid(
            partition, config.beta_grid_resolution, config.clarke_grid_cap
        ):
            if W.values not in {s.values for s in selectors}:
                selectors.append(W)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    bundle = eval_bundle(spec, sol.x, sol.y)
    lag = lagrangian_eval(bundle, sol.mu, sol.lam)
    stack = np.concatenate([lag.grad_y, bundle.h, -bundle.g])
    out = GeneralizedDerivativeSet(kind=kind)
    for W in selectors:
        try:
            H = assemble_h_matrix(spec, sol, W)
        except SingularMatrixError as exc:
            out.errors.append((W, str(exc)))
            continue
        out.items.append((W, lag.grad_x - H.T @ stack))
    return out


def _partition_of(spec: ProblemSpec, sol: KktSolution, config: CheckConfig) -> ActivePartition:
    from .lower import classify_partition

    bundle = eval_bundle(spec, sol.x, sol.y)
    return classify_partition(bundle.g, sol.lam, config.tol_act)
