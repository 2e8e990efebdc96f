"""Problem instances: the min-max data (f, h, g, H, G) and their derivatives.

The on-disk format is line oriented:

    dims n m m1 m2 n1 n2
    f  = <expr>
    h<k> = <expr>     # k = 1..m1, constraints h(x,y) = 0
    g<k> = <expr>     # k = 1..m2, constraints g(x,y) <= 0
    H<k> = <expr>     # k = 1..n1, x-only, H(x) = 0
    G<k> = <expr>     # k = 1..n2, x-only, G(x) <= 0

'#' starts a comment.  H and G must not reference y-variables.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .expressions import (
    DomainError,
    Expr,
    ExpressionError,
    Var,
    differentiate,
    evaluate,
    parse_expression,
    to_string,
    uses_abs,
    variables_of,
)

HESSIAN_SYMMETRY_TOL = 1e-12


class ProblemFormatError(Exception):
    """Problem text violates the grammar or the declared dimensions."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        if line:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(eq=False)
class ProblemSpec:
    """A constrained min-max instance min_x max_y f(x,y) with

    inner feasible set  {y : h(x,y) = 0, g(x,y) <= 0}  and
    outer feasible set  {x : H(x) = 0,  G(x) <= 0}.
    """

    n: int
    m: int
    m1: int
    m2: int
    n1: int
    n2: int
    f: Expr
    h: list[Expr] = field(default_factory=list)
    g: list[Expr] = field(default_factory=list)
    H: list[Expr] = field(default_factory=list)
    G: list[Expr] = field(default_factory=list)

    def __post_init__(self):
        dims = (self.n, self.m, self.m1, self.m2, self.n1, self.n2)
        if any(d < 0 for d in dims):
            raise ProblemFormatError("dimensions must be nonnegative")
        if self.n < 1 or self.m < 1:
            raise ProblemFormatError("need at least one x and one y variable")
        for name, exprs, want in (
            ("h", self.h, self.m1),
            ("g", self.g, self.m2),
            ("H", self.H, self.n1),
            ("G", self.G, self.n2),
        ):
            if len(exprs) != want:
                raise ProblemFormatError(
                    f"{name} has {len(exprs)} entries, declared {want}"
                )
        for label, expr in self._labelled():
            for kind, idx in variables_of(expr):
                limit = self.n if kind == "x" else self.m
                if idx >= limit:
                    raise ProblemFormatError(
                        f"{label} references {kind}{idx + 1} but {kind}-dimension is {limit}"
                    )
                if kind == "y" and label[0] in "HG":
                    raise ProblemFormatError(
                        f"{label} is an upper-level constraint but references y{idx + 1}"
                    )

    def _labelled(self):
        yield "f", self.f
        for k, e in enumerate(self.h):
            yield f"h{k + 1}", e
        for k, e in enumerate(self.g):
            yield f"g{k + 1}", e
        for k, e in enumerate(self.H):
            yield f"H{k + 1}", e
        for k, e in enumerate(self.G):
            yield f"G{k + 1}", e

    def __eq__(self, other):
        if not isinstance(other, ProblemSpec):
            return NotImplemented
        return (
            (self.n, self.m, self.m1, self.m2, self.n1, self.n2)
            == (other.n, other.m, other.m1, other.m2, other.n1, other.n2)
            and self.f == other.f
            and self.h == other.h
            and self.g == other.g
            and self.H == other.H
            and self.G == other.G
        )

    @property
    def smooth_for_conditions(self) -> bool:
        """abs is parsed but rejected by the condition-checking entry points."""
        return not any(uses_abs(e) for _, e in self._labelled())

    # -- cached derivative expression tables -------------------------------

    @cached_property
    def _xvars(self) -> list[Var]:
        return [Var("x", i) for i in range(self.n)]

    @cached_property
    def _yvars(self) -> list[Var]:
        return [Var("y", i) for i in range(self.m)]

    @cached_property
    def _tables(self):
        def grad(e, vs):
            return [differentiate(e, v) for v in vs]

        def hess(gr, vs):
            return [[differentiate(gi, v) for v in vs] for gi in gr]

        tabs = {}
        fx = grad(self.f, self._xvars)
        fy = grad(self.f, self._yvars)
        tabs["f"] = {
            "x": fx,
            "y": fy,
            "xx": hess(fx, self._xvars),
            "xy": hess(fx, self._yvars),
            "yx": hess(fy, self._xvars),
            "yy": hess(fy, self._yvars),
        }
        for name, exprs in (("h", self.h), ("g", self.g)):
            rows = []
            for e in exprs:
                ex = grad(e, self._xvars)
                ey = grad(e, self._yvars)
                rows.append(
                    {
                        "x": ex,
                        "y": ey,
                        "xx": hess(ex, self._xvars),
                        "xy": hess(ex, self._yvars),
                        "yx": hess(ey, self._xvars),
                        "yy": hess(ey, self._yvars),
                    }
                )
            tabs[name] = rows
        for name, exprs in (("H", self.H), ("G", self.G)):
            rows = []
            for e in exprs:
                ex = grad(e, self._xvars)
                rows.append({"x": ex, "xx": hess(ex, self._xvars)})
            tabs[name] = rows
        return tabs


@dataclass
class CandidatePoint:
    """A point (x*, y*) to certify, with optional multipliers to verify."""

    x: np.ndarray
    y: np.ndarray
    mu: np.ndarray | None = None
    lam: np.ndarray | None = None
    u: np.ndarray | None = None
    v: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        for name in ("mu", "lam", "u", "v"):
            val = getattr(self, name)
            if val is not None:
                arr = np.atleast_1d(np.asarray(val, dtype=float))
                if not np.all(np.isfinite(arr)):
                    raise ValueError(f"{name} entries must be finite")
                setattr(self, name, arr)
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("candidate coordinates must be finite")

    def validate_against(self, spec: ProblemSpec):
        expect = {
            "x": spec.n,
            "y": spec.m,
            "mu": spec.m1,
            "lam": spec.m2,
            "u": spec.n1,
            "v": spec.n2,
        }
        for name, want in expect.items():
            val = getattr(self, name)
            if val is None:
                continue
            if val.shape != (want,):
                raise ValueError(f"{name} has shape {val.shape}, expected ({want},)")


@dataclass
class DerivativeBundle:
    """All values/derivatives of the problem data at one (x, y)."""

    x: np.ndarray
    y: np.ndarray
    f: float
    fx: np.ndarray  # (n,)
    fy: np.ndarray  # (m,)
    fxx: np.ndarray  # (n, n)
    fxy: np.ndarray  # (n, m)
    fyx: np.ndarray  # (m, n)
    fyy: np.ndarray  # (m, m)
    h: np.ndarray  # (m1,)
    h_jx: np.ndarray  # (m1, n)
    h_jy: np.ndarray  # (m1, m)
    h_xx: np.ndarray  # (m1, n, n)
    h_yx: np.ndarray  # (m1, m, n)
    h_yy: np.ndarray  # (m1, m, m)
    g: np.ndarray
    g_jx: np.ndarray
    g_jy: np.ndarray
    g_xx: np.ndarray
    g_yx: np.ndarray
    g_yy: np.ndarray
    HU: np.ndarray  # (n1,)
    HU_j: np.ndarray  # (n1, n)
    HU_xx: np.ndarray  # (n1, n, n)
    GU: np.ndarray
    GU_j: np.ndarray
    GU_xx: np.ndarray


def _eval_vec(exprs, x, y):
    return np.array([float(evaluate(e, x, y)) for e in exprs], dtype=float)


def _eval_mat(rows, x, y):
    if not rows:
        return np.zeros((0, 0))
    return np.array([[float(evaluate(e, x, y)) for e in row] for row in rows])


def _check_sym(mat: np.ndarray, label: str):
    if mat.size == 0:
        return
    asym = float(np.max(np.abs(mat - mat.T)))
    if asym > HESSIAN_SYMMETRY_TOL:
        raise ValueError(f"{label} Hessian asymmetry {asym:.3e} exceeds tolerance")


def eval_bundle(spec: ProblemSpec, x: np.ndarray, y: np.ndarray) -> DerivativeBundle:
    """Evaluate all problem data and exact derivatives at (x, y)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != (spec.n,) or y.shape != (spec.m,):
        raise ValueError(
            f"point has shapes {x.shape}/{y.shape}, expected ({spec.n},)/({spec.m},)"
        )
    t = spec._tables
    fxx = _eval_mat(t["f"]["xx"], x, y)
    fyy = _eval_mat(t["f"]["yy"], x, y)
    fxy = _eval_mat(t["f"]["xy"], x, y)
    fyx = _eval_mat(t["f"]["yx"], x, y)
    _check_sym(fxx, "f/xx")
    _check_sym(fyy, "f/yy")
    if float(np.max(np.abs(fxy - fyx.T), initial=0.0)) > HESSIAN_SYMMETRY_TOL:
        raise ValueError("f cross-derivative blocks are not mutual transposes")

    m1, m2 = spec.m1, spec.m2
    h_val = _eval_vec(spec.h, x, y) if m1 else np.zeros(0)
    g_val = _eval_vec(spec.g, x, y) if m2 else np.zeros(0)
    h_jx = np.zeros((m1, spec.n))
    h_jy = np.zeros((m1, spec.m))
    h_xx = np.zeros((m1, spec.n, spec.n))
    h_yx = np.zeros((m1, spec.m, spec.n))
    h_yy = np.zeros((m1, spec.m, spec.m))
    for k, row in enumerate(t["h"]):
        h_jx[k] = _eval_vec(row["x"], x, y)
        h_jy[k] = _eval_vec(row["y"], x, y)
        h_xx[k] = _eval_mat(row["xx"], x, y)
        h_yx[k] = _eval_mat(row["yx"], x, y)
        h_yy[k] = _eval_mat(row["yy"], x, y)
        _check_sym(h_xx[k], f"h{k + 1}/xx")
        _check_sym(h_yy[k], f"h{k + 1}/yy")
        xy = _eval_mat(row["xy"], x, y)
        if float(np.max(np.abs(xy - h_yx[k].T), initial=0.0)) > HESSIAN_SYMMETRY_TOL:
            raise ValueError(f"h{k + 1} cross blocks are not mutual transposes")
    g_jx = np.zeros((m2, spec.n))
    g_jy = np.zeros((m2, spec.m))
    g_xx = np.zeros((m2, spec.n, spec.n))
    g_yx = np.zeros((m2, spec.m, spec.n))
    g_yy = np.zeros((m2, spec.m, spec.m))
    for k, row in enumerate(t["g"]):
        g_jx[k] = _eval_vec(row["x"], x, y)
        g_jy[k] = _eval_vec(row["y"], x, y)
        g_xx[k] = _eval_mat(row["xx"], x, y)
        g_yx[k] = _eval_mat(row["yx"], x, y)
        g_yy[k] = _eval_mat(row["yy"], x, y)
        _check_sym(g_xx[k], f"g{k + 1}/xx")
        _check_sym(g_yy[k], f"g{k + 1}/yy")
        xy = _eval_mat(row["xy"], x, y)
        if float(np.max(np.abs(xy - g_yx[k].T), initial=0.0)) > HESSIAN_SYMMETRY_TOL:
            raise ValueError(f"g{k + 1} cross blocks are not mutual transposes")

    n1, n2 = spec.n1, spec.n2
    HU_val = _eval_vec(spec.H, x, y) if n1 else np.zeros(0)
    GU_val = _eval_vec(spec.G, x, y) if n2 else np.zeros(0)
    HU_j = np.zeros((n1, spec.n))
    HU_xx = np.zeros((n1, spec.n, spec.n))
    for k, row in enumerate(t["H"]):
        HU_j[k] = _eval_vec(row["x"], x, y)
        HU_xx[k] = _eval_mat(row["xx"], x, y)
        _check_sym(HU_xx[k], f"H{k + 1}/xx")
    GU_j = np.zeros((n2, spec.n))
    GU_xx = np.zeros((n2, spec.n, spec.n))
    for k, row in enumerate(t["G"]):
        GU_j[k] = _eval_vec(row["x"], x, y)
        GU_xx[k] = _eval_mat(row["xx"], x, y)
        _check_sym(GU_xx[k], f"G{k + 1}/xx")

    bundle = DerivativeBundle(
        x=x,
        y=y,
        f=float(evaluate(spec.f, x, y)),
        fx=_eval_vec(t["f"]["x"], x, y),
        fy=_eval_vec(t["f"]["y"], x, y),
        fxx=fxx,
        fxy=fxy,
        fyx=fyx,
        fyy=fyy,
        h=h_val,
        h_jx=h_jx,
        h_jy=h_jy,
        h_xx=h_xx,
        h_yx=h_yx,
        h_yy=h_yy,
        g=g_val,
        g_jx=g_jx,
        g_jy=g_jy,
        g_xx=g_xx,
        g_yx=g_yx,
        g_yy=g_yy,
        HU=HU_val,
        HU_j=HU_j,
        HU_xx=HU_xx,
        GU=GU_val,
        GU_j=GU_j,
        GU_xx=GU_xx,
    )
    for arr in (bundle.fx, bundle.fy, bundle.fxx, bundle.fyy):
        if arr.size and not np.all(np.isfinite(arr)):
            raise DomainError("non-finite derivative value", spec.f)
    return bundle


# ---------------------------------------------------------------------------
# parsing / serialization of the on-disk format

_ASSIGN_RE = re.compile(r"^\s*([fhgHG])([0-9]*)\s*=\s*(.*)$")


def parse_problem(text: str) -> ProblemSpec:
    """Parse problem text into a validated ProblemSpec."""
    dims = None
    dims_line = 0
    assigns: dict[str, tuple[Expr, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if dims is None:
            parts = line.split()
            if parts[0] != "dims":
                raise ProblemFormatError("first line must be 'dims n m m1 m2 n1 n2'", lineno)
            if len(parts) != 7:
                raise ProblemFormatError("dims expects 6 integers", lineno)
            try:
                dims = tuple(int(p) for p in parts[1:])
            except ValueError:
                raise ProblemFormatError("dims entries must be integers", lineno)
            if any(d < 0 for d in dims):
                raise ProblemFormatError("dims entries must be nonnegative", lineno)
            dims_line = lineno
            continue
        m = _ASSIGN_RE.match(line)
        if m is None:
            raise ProblemFormatError(f"expected an assignment, got {line!r}", lineno)
        name, idx, rhs = m.group(1), m.group(2), m.group(3)
        key = name + idx
        if name == "f" and idx:
            raise ProblemFormatError("objective is plain 'f'", lineno)
        if name != "f" and not idx:
            raise ProblemFormatError(f"constraint '{name}' needs an index", lineno)
        if key in assigns:
            raise ProblemFormatError(f"duplicate assignment for {key}", lineno)
        try:
            expr = parse_expression(rhs, lineno)
        except ExpressionError as exc:
            raise ProblemFormatError(str(exc), lineno) from exc
        assigns[key] = (expr, lineno)
    if dims is None:
        raise ProblemFormatError("missing 'dims' line")
    n, m, m1, m2, n1, n2 = dims
    if "f" not in assigns:
        raise ProblemFormatError("missing objective 'f'")

    def collect(prefix: str, count: int) -> list[Expr]:
        out = []
        for k in range(1, count + 1):
            key = f"{prefix}{k}"
            if key not in assigns:
                raise ProblemFormatError(f"missing {key} (declared by dims)", dims_line)
            out.append(assigns[key][0])
        return out

    h = collect("h", m1)
    g = collect("g", m2)
    HU = collect("H", n1)
    GU = collect("G", n2)
    declared = {"f"} | {f"h{k}" for k in range(1, m1 + 1)}
    declared |= {f"g{k}" for k in range(1, m2 + 1)}
    declared |= {f"H{k}" for k in range(1, n1 + 1)}
    declared |= {f"G{k}" for k in range(1, n2 + 1)}
    for key, (_, lineno) in assigns.items():
        if key not in declared:
            raise ProblemFormatError(f"{key} not covered by dims", lineno)
    try:
        spec = ProblemSpec(n, m, m1, m2, n1, n2, assigns["f"][0], h, g, HU, GU)
    except ProblemFormatError as exc:
        # attach the offending line when the validation names a constraint
        for key, (_, lineno) in assigns.items():
            if str(exc).startswith(key + " "):
                raise ProblemFormatError(str(exc), lineno) from exc
        raise
    return spec


def serialize_problem(spec: ProblemSpec) -> str:
    lines = [f"dims {spec.n} {spec.m} {spec.m1} {spec.m2} {spec.n1} {spec.n2}"]
    lines.append(f"f = {to_string(spec.f)}")
    for k, e in enumerate(spec.h):
        lines.append(f"h{k + 1} = {to_string(e)}")
    for k, e in enumerate(spec.g):
        lines.append(f"g{k + 1} = {to_string(e)}")
    for k, e in enumerate(spec.H):
        lines.append(f"H{k + 1} = {to_string(e)}")
    for k, e in enumerate(spec.G):
        lines.append(f"G{k + 1} = {to_string(e)}")
    return "\n".join(lines) + "\n"


def problem_digest(spec: ProblemSpec) -> str:
    """Stable identifier: sha256 of the canonical serialization."""
    return hashlib.sha256(serialize_problem(spec).encode("utf-8")).hexdigest()
