"""Brute-force ground truth: finite differences, feasible-grid maximization,
and a direct grid test of the two-sided local minimax definition.

Grid oracles are wired for n <= 2, m <= 2 only; cost grows geometrically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .expressions import evaluate
from .problem import ProblemSpec


@dataclass
class GridSpec:
    """delta0: outer radius; step: grid spacing; eta(delta) = eta_factor * delta;
    tol: comparison tolerance for the two inequalities."""

    delta0: float = 0.1
    step: float = 1e-3
    eta_factor: float = 2.0
    tol: float = 1e-9
    levels: int = 4
    feas_tol: float = 1e-9

    def __post_init__(self):
        if self.delta0 <= 0 or self.step <= 0 or self.eta_factor <= 0:
            raise ValueError("delta0, step and eta_factor must be positive")
        if self.step > self.delta0:
            raise ValueError("step must not exceed delta0 (>= 3 points per axis)")

    def eta(self, delta: float) -> float:
        return self.eta_factor * delta


def fd_derivatives(func, point, step: float = 1e-5, hess_step: float = 1e-3):
    """Central-difference gradient and (symmetrized) Hessian of a scalar field."""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    n = point.shape[0]
    grad = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        grad[i] = (func(point + e) - func(point - e)) / (2.0 * step)
    hess = np.zeros((n, n))
    f0 = func(point)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = hess_step
        hess[i, i] = (func(point + ei) - 2.0 * f0 + func(point - ei)) / hess_step**2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = hess_step
            hess[i, j] = (
                func(point + ei + ej)
                - func(point + ei - ej)
                - func(point - ei + ej)
                + func(point - ei - ej)
            ) / (4.0 * hess_step**2)
            hess[j, i] = hess[i, j]
    return grad, 0.5 * (hess + hess.T)


def _axis_grid(center: np.ndarray, radius: float, points: int) -> list[np.ndarray]:
    return [np.linspace(c - radius, c + radius, points) for c in center]


def _mesh(axes: list[np.ndarray]) -> list[np.ndarray]:
    if len(axes) == 1:
        return [axes[0]]
    grids = np.meshgrid(*axes, indexing="ij")
    return [g.ravel() for g in grids]


class EmptyFeasibleGridError(Exception):
    pass


@dataclass
class GridMaxResult:
    y: np.ndarray
    value: float
    feasible_points: int
    total_points: int


def grid_local_maximize(
    spec: ProblemSpec,
    x,
    center,
    radius: float,
    points: int,
    feas_tol: float = 1e-9,
) -> GridMaxResult:
    """argmax of f(x, .) over the feasible grid points in a box around center."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if spec.m > 2:
        raise ValueError("grid oracle supports m <= 2 only")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    center = np.atleast_1d(np.asarray(center, dtype=float))
    ys = _mesh(_axis_grid(center, radius, points))
    total = ys[0].shape[0]
    feas = np.ones(total, dtype=bool)
    for e in spec.h:
        vals = np.asarray(evaluate(e, x, ys, strict=False), dtype=float)
        feas &= np.abs(vals) <= feas_tol
    for e in spec.g:
        vals = np.asarray(evaluate(e, x, ys, strict=False), dtype=float)
        feas &= vals <= feas_tol
    if not np.any(feas):
        raise EmptyFeasibleGridError(
            f"no feasible grid point in the ball of radius {radius} around {center}"
        )
    fvals = np.broadcast_to(
        np.asarray(evaluate(spec.f, x, ys, strict=False), dtype=float), (total,)
    ).copy()
    fvals[~np.isfinite(fvals)] = -np.inf
    fvals[~feas] = -np.inf
    k = int(np.argmax(fvals))
    best_y = np.array([axis[k] for axis in ys])
    return GridMaxResult(
        y=best_y,
        value=float(fvals[k]),
        feasible_points=int(np.sum(feas)),
        total_points=total,
    )


@dataclass
class OracleReport:
    passed: bool
    worst_violation: float
    worst_side: str | None
    worst_witness: list | None
    f_star: float
    levels: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def verify_minimax_definition(
    spec: ProblemSpec, x_star, y_star, grid: GridSpec | None = None
) -> OracleReport:
    """Grid check of both defining inequalities on a shrinking delta ladder:
    y-candidates may not beat f(x*, y*) on Y(x*), and nearby feasible x must
    reach at least f(x*, y*) when maximizing over the eta(delta) ball."""
    grid = grid or GridSpec()
    if spec.n > 2 or spec.m > 2:
        raise ValueError("definition oracle supports n <= 2 and m <= 2 only")
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    y_star = np.atleast_1d(np.asarray(y_star, dtype=float))
    f_star = float(evaluate(spec.f, x_star, y_star))
    report = OracleReport(
        passed=True, worst_violation=0.0, worst_side=None, worst_witness=None,
        f_star=f_star,
    )

    def npts(radius: float) -> int:
        return 2 * max(1, int(np.ceil(radius / grid.step))) + 1

    deltas = [grid.delta0 * 0.5**k for k in range(grid.levels)]
    for delta in deltas:
        level = {"delta": delta, "eta": grid.eta(delta)}
        # left inequality: f(x*, y) <= f(x*, y*) over Y(x*) in the delta ball
        ys = _mesh(_axis_grid(y_star, delta, npts(delta)))
        total = ys[0].shape[0]
        feas = np.ones(total, dtype=bool)
        for e in spec.h:
            feas &= np.abs(np.asarray(evaluate(e, x_star, ys, strict=False))) <= grid.feas_tol
        for e in spec.g:
            feas &= np.asarray(evaluate(e, x_star, ys, strict=False)) <= grid.feas_tol
        if not np.any(feas):
            report.notes.append(f"delta={delta:g}: empty feasible y-grid")
            level["left_violation"] = None
        else:
            fv = np.broadcast_to(
                np.asarray(evaluate(spec.f, x_star, ys, strict=False), dtype=float),
                (total,),
            ).copy()
            fv[~np.isfinite(fv)] = -np.inf
            fv[~feas] = -np.inf
            k = int(np.argmax(fv))
            viol = float(fv[k] - f_star)
            level["left_violation"] = viol
            if viol > report.worst_violation:
                report.worst_violation = viol
                report.worst_side = "left"
                report.worst_witness = [float(axis[k]) for axis in ys]

        # right inequality: f(x*, y*) <= max f(x, .) over the eta ball
        xs = _mesh(_axis_grid(x_star, delta, npts(delta)))
        xtotal = xs[0].shape[0]
        xfeas = np.ones(xtotal, dtype=bool)
        for e in spec.H:
            xfeas &= np.abs(np.asarray(evaluate(e, xs, np.zeros(spec.m), strict=False))) <= grid.feas_tol
        for e in spec.G:
            xfeas &= np.asarray(evaluate(e, xs, np.zeros(spec.m), strict=False)) <= grid.feas_tol
        if not np.any(xfeas):
            report.notes.append(f"delta={delta:g}: empty feasible x-grid")
            level["right_violation"] = None
            report.levels.append(level)
            continue
        worst_right = -np.inf
        worst_x = None
        empty_inner = 0
        for idx in np.flatnonzero(xfeas):
            x_pt = np.array([axis[idx] for axis in xs])
            try:
                res = grid_local_maximize(
                    spec, x_pt, y_star, grid.eta(delta), npts(grid.eta(delta)),
                    feas_tol=grid.feas_tol,
                )
            except EmptyFeasibleGridError:
                empty_inner += 1
                continue
            viol = f_star - res.value
            if viol > worst_right:
                worst_right = viol
                worst_x = x_pt
        if empty_inner:
            report.notes.append(
                f"delta={delta:g}: {empty_inner} x-grid points had empty inner grids"
            )
        if worst_x is None:
            level["right_violation"] = None
        else:
            level["right_violation"] = float(worst_right)
            if worst_right > report.worst_violation:
                report.worst_violation = float(worst_right)
                report.worst_side = "right"
                report.worst_witness = worst_x.tolist()
        report.levels.append(level)

    report.passed = report.worst_violation <= grid.tol
    return report
