"""Scalar expression trees with exact symbolic differentiation.

Expressions are immutable trees over the variables x1..xn, y1..ym with the
arithmetic ops +, -, *, /, ^ and the functions sin, cos, exp, log, sqrt, abs
(plus an internal sign node produced by differentiating abs).  Evaluation
accepts floats or numpy arrays per variable; differentiation is closed (the
derivative of an expression is an expression).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

Number = Union[float, np.ndarray]


class ExpressionError(Exception):
    """Malformed expression text."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        if line:
            message = f"line {line}, col {col}: {message}"
        super().__init__(message)


class DomainError(Exception):
    """Evaluation left the domain of an elementary function."""

    def __init__(self, message: str, expr: "Expr"):
        self.expr = expr
        super().__init__(f"{message} in '{to_string(expr)}'")


@dataclass(frozen=True)
class Expr:
    """Base node; concrete nodes below."""


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    kind: str  # 'x' or 'y'
    index: int  # zero-based


@dataclass(frozen=True)
class Add(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Sub(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Mul(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Div(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Pow(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Neg(Expr):
    a: Expr


@dataclass(frozen=True)
class Func(Expr):
    name: str  # sin cos exp log sqrt abs sign
    a: Expr


FUNCTION_NAMES = ("sin", "cos", "exp", "log", "sqrt", "abs", "sign")


# ---------------------------------------------------------------------------
# evaluation


def evaluate(expr: Expr, x: np.ndarray, y: np.ndarray, strict: bool = True) -> Number:
    """Evaluate at (x, y).  Entries of x/y may be scalars or broadcastable arrays.

    strict=True raises DomainError on log/sqrt/division violations; strict=False
    lets NaN/inf flow through (used by grid oracles, which mask afterwards).
    """
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        vec = x if expr.kind == "x" else y
        return vec[expr.index]
    if isinstance(expr, Add):
        return evaluate(expr.a, x, y, strict) + evaluate(expr.b, x, y, strict)
    if isinstance(expr, Sub):
        return evaluate(expr.a, x, y, strict) - evaluate(expr.b, x, y, strict)
    if isinstance(expr, Mul):
        return evaluate(expr.a, x, y, strict) * evaluate(expr.b, x, y, strict)
    if isinstance(expr, Div):
        num = evaluate(expr.a, x, y, strict)
        den = evaluate(expr.b, x, y, strict)
        if strict and np.any(den == 0):
            raise DomainError("division by zero", expr)
        with np.errstate(divide="ignore", invalid="ignore"):
            return num / den
    if isinstance(expr, Pow):
        base = evaluate(expr.a, x, y, strict)
        exponent = evaluate(expr.b, x, y, strict)
        if strict:
            exp_arr = np.asarray(exponent, dtype=float)
            base_arr = np.asarray(base, dtype=float)
            integral = np.all(exp_arr == np.round(exp_arr))
            if not integral and np.any(base_arr < 0):
                raise DomainError("negative base with non-integer exponent", expr)
            if np.any((base_arr == 0) & (exp_arr < 0)):
                raise DomainError("zero base with negative exponent", expr)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.power(base, exponent)
    if isinstance(expr, Neg):
        return -evaluate(expr.a, x, y, strict)
    if isinstance(expr, Func):
        val = evaluate(expr.a, x, y, strict)
        if expr.name == "sin":
            return np.sin(val)
        if expr.name == "cos":
            return np.cos(val)
        if expr.name == "exp":
            return np.exp(val)
        if expr.name == "log":
            if strict and np.any(np.asarray(val) <= 0):
                raise DomainError("log of a non-positive value", expr)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.log(val)
        if expr.name == "sqrt":
            if strict and np.any(np.asarray(val) < 0):
                raise DomainError("sqrt of a negative value", expr)
            with np.errstate(invalid="ignore"):
                return np.sqrt(val)
        if expr.name == "abs":
            return np.abs(val)
        if expr.name == "sign":
            return np.sign(val)
    raise TypeError(f"unknown node {expr!r}")


def uses_abs(expr: Expr) -> bool:
    """True if any abs node occurs (condition checks reject these)."""
    if isinstance(expr, Func) and expr.name == "abs":
        return True
    for child in _children(expr):
        if uses_abs(child):
            return True
    return False


def variables_of(expr: Expr) -> set[tuple[str, int]]:
    if isinstance(expr, Var):
        return {(expr.kind, expr.index)}
    out: set[tuple[str, int]] = set()
    for child in _children(expr):
        out |= variables_of(child)
    return out


def _children(expr: Expr) -> tuple[Expr, ...]:
    if isinstance(expr, (Add, Sub, Mul, Div, Pow)):
        return (expr.a, expr.b)
    if isinstance(expr, (Neg, Func)):
        return (expr.a,)
    return ()


# ---------------------------------------------------------------------------
# differentiation (with light smart-constructor simplification)


def _is_const(e: Expr, v: float | None = None) -> bool:
    return isinstance(e, Const) and (v is None or e.value == v)


def s_add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def s_sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return s_neg(b)
    return Sub(a, b)


def s_mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Mul(a, b)


def s_div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return Const(0.0)
    if _is_const(b, 1.0):
        return a
    return Div(a, b)


def s_pow(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1.0):
        return a
    if _is_const(b, 0.0):
        return Const(1.0)
    return Pow(a, b)


def s_neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def differentiate(expr: Expr, var: Var) -> Expr:
    """Exact partial derivative with respect to var, as an expression."""
    if isinstance(expr, Const):
        return Const(0.0)
    if isinstance(expr, Var):
        hit = expr.kind == var.kind and expr.index == var.index
        return Const(1.0 if hit else 0.0)
    if isinstance(expr, Add):
        return s_add(differentiate(expr.a, var), differentiate(expr.b, var))
    if isinstance(expr, Sub):
        return s_sub(differentiate(expr.a, var), differentiate(expr.b, var))
    if isinstance(expr, Mul):
        return s_add(
            s_mul(differentiate(expr.a, var), expr.b),
            s_mul(expr.a, differentiate(expr.b, var)),
        )
    if isinstance(expr, Div):
        da = differentiate(expr.a, var)
        db = differentiate(expr.b, var)
        return s_div(
            s_sub(s_mul(da, expr.b), s_mul(expr.a, db)),
            s_pow(expr.b, Const(2.0)),
        )
    if isinstance(expr, Pow):
        da = differentiate(expr.a, var)
        db = differentiate(expr.b, var)
        if _is_const(db, 0.0) and isinstance(expr.b, Const):
            c = expr.b.value
            return s_mul(s_mul(Const(c), s_pow(expr.a, Const(c - 1.0))), da)
        # general a^b: a^b * (db*log a + b*da/a)
        return s_mul(
            expr,
            s_add(s_mul(db, Func("log", expr.a)), s_mul(expr.b, s_div(da, expr.a))),
        )
    if isinstance(expr, Neg):
        return s_neg(differentiate(expr.a, var))
    if isinstance(expr, Func):
        da = differentiate(expr.a, var)
        name = expr.name
        if name == "sin":
            return s_mul(Func("cos", expr.a), da)
        if name == "cos":
            return s_neg(s_mul(Func("sin", expr.a), da))
        if name == "exp":
            return s_mul(expr, da)
        if name == "log":
            return s_div(da, expr.a)
        if name == "sqrt":
            return s_div(da, s_mul(Const(2.0), expr))
        if name == "abs":
            # nondifferentiable at 0; sign(0)=0 surfaces there during evaluation
            return s_mul(Func("sign", expr.a), da)
        if name == "sign":
            return Const(0.0)
    raise TypeError(f"unknown node {expr!r}")


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[()+\-*/^−]))"
)

_VAR_RE = re.compile(r"^([xy])([0-9]+)$")


class _Tokenizer:
    def __init__(self, text: str, line: int = 0):
        self.text = text
        self.line = line
        self.pos = 0
        self.tokens: list[tuple[str, str, int]] = []
        while self.pos < len(text):
            m = _TOKEN_RE.match(text, self.pos)
            if m is None:
                if text[self.pos :].strip() == "":
                    break
                raise ExpressionError(
                    f"unexpected character {text[self.pos]!r}", line, self.pos + 1
                )
            col = m.start(m.lastgroup) + 1
            val = m.group(m.lastgroup)
            if m.lastgroup == "op" and val == "−":
                val = "-"
            self.tokens.append((m.lastgroup, val, col))
            self.pos = m.end()
        self.idx = 0

    def peek(self):
        if self.idx < len(self.tokens):
            return self.tokens[self.idx]
        return ("eof", "", len(self.text) + 1)

    def next(self):
        tok = self.peek()
        self.idx += 1
        return tok


def parse_expression(text: str, line: int = 0) -> Expr:
    """Parse infix expression text (+ - * / ^, parentheses, functions, x_k/y_k)."""
    tz = _Tokenizer(text, line)
    expr = _parse_sum(tz)
    kind, val, col = tz.peek()
    if kind != "eof":
        raise ExpressionError(f"unexpected token {val!r}", line, col)
    return expr


def _parse_sum(tz: _Tokenizer) -> Expr:
    node = _parse_term(tz)
    while True:
        kind, val, _ = tz.peek()
        if kind == "op" and val in "+-":
            tz.next()
            rhs = _parse_term(tz)
            node = Add(node, rhs) if val == "+" else Sub(node, rhs)
        else:
            return node


def _parse_term(tz: _Tokenizer) -> Expr:
    node = _parse_unary(tz)
    while True:
        kind, val, _ = tz.peek()
        if kind == "op" and val in "*/":
            tz.next()
            rhs = _parse_unary(tz)
            node = Mul(node, rhs) if val == "*" else Div(node, rhs)
        else:
            return node


def _parse_unary(tz: _Tokenizer) -> Expr:
    kind, val, _ = tz.peek()
    if kind == "op" and val == "-":
        tz.next()
        return Neg(_parse_unary(tz))
    return _parse_power(tz)


def _parse_power(tz: _Tokenizer) -> Expr:
    base = _parse_atom(tz)
    kind, val, _ = tz.peek()
    if kind == "op" and val == "^":
        tz.next()
        # right-associative; exponent may carry a unary minus
        return Pow(base, _parse_unary_power(tz))
    return base


def _parse_unary_power(tz: _Tokenizer) -> Expr:
    kind, val, _ = tz.peek()
    if kind == "op" and val == "-":
        tz.next()
        return Neg(_parse_unary_power(tz))
    return _parse_power(tz)


def _parse_atom(tz: _Tokenizer) -> Expr:
    kind, val, col = tz.next()
    if kind == "num":
        return Const(float(val))
    if kind == "ident":
        m = _VAR_RE.match(val)
        if m:
            return Var(m.group(1), int(m.group(2)) - 1)
        if val in FUNCTION_NAMES:
            k2, v2, c2 = tz.next()
            if not (k2 == "op" and v2 == "("):
                raise ExpressionError(f"expected '(' after {val}", tz.line, c2)
            arg = _parse_sum(tz)
            k3, v3, c3 = tz.next()
            if not (k3 == "op" and v3 == ")"):
                raise ExpressionError("expected ')'", tz.line, c3)
            return Func(val, arg)
        raise ExpressionError(f"unknown identifier {val!r}", tz.line, col)
    if kind == "op" and val == "(":
        inner = _parse_sum(tz)
        k2, v2, c2 = tz.next()
        if not (k2 == "op" and v2 == ")"):
            raise ExpressionError("expected ')'", tz.line, c2)
        return inner
    raise ExpressionError(f"unexpected token {val!r}", tz.line, col)


# ---------------------------------------------------------------------------
# printing

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


def _prec(expr: Expr) -> int:
    if isinstance(expr, (Add, Sub)):
        return _PREC_ADD
    if isinstance(expr, (Mul, Div)):
        return _PREC_MUL
    if isinstance(expr, Neg):
        return _PREC_NEG
    if isinstance(expr, Pow):
        return _PREC_POW
    if isinstance(expr, Const) and expr.value < 0:
        return _PREC_NEG
    return _PREC_ATOM


def to_string(expr: Expr) -> str:
    """Render in the problem-file grammar; reparsing yields an equal tree."""
    if isinstance(expr, Const):
        return repr(expr.value)
    if isinstance(expr, Var):
        return f"{expr.kind}{expr.index + 1}"
    if isinstance(expr, Add):
        return f"{_wrap(expr.a, _PREC_ADD)} + {_wrap(expr.b, _PREC_ADD + 1)}"
    if isinstance(expr, Sub):
        return f"{_wrap(expr.a, _PREC_ADD)} - {_wrap(expr.b, _PREC_ADD + 1)}"
    if isinstance(expr, Mul):
        return f"{_wrap(expr.a, _PREC_MUL)}*{_wrap(expr.b, _PREC_MUL + 1)}"
    if isinstance(expr, Div):
        return f"{_wrap(expr.a, _PREC_MUL)}/{_wrap(expr.b, _PREC_MUL + 1)}"
    if isinstance(expr, Neg):
        return f"-{_wrap(expr.a, _PREC_NEG)}"
    if isinstance(expr, Pow):
        return f"{_wrap(expr.a, _PREC_ATOM)}^{_wrap(expr.b, _PREC_NEG)}"
    if isinstance(expr, Func):
        return f"{expr.name}({to_string(expr.a)})"
    raise TypeError(f"unknown node {expr!r}")


def _wrap(expr: Expr, min_prec: int) -> str:
    text = to_string(expr)
    if _prec(expr) < min_prec:
        return f"({text})"
    return text
