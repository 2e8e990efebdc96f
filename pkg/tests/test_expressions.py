import numpy as np
import pytest

from minimaxcert.expressions import (
    Const,
    DomainError,
    ExpressionError,
    Var,
    differentiate,
    evaluate,
    parse_expression,
    to_string,
)


def central_fd(expr, x, y, var, step=1e-6):
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    xp, xm = x.copy(), x.copy()
    yp, ym = y.copy(), y.copy()
    if var.kind == "x":
        xp[var.index] += step
        xm[var.index] -= step
    else:
        yp[var.index] += step
        ym[var.index] -= step
    return (evaluate(expr, xp, yp) - evaluate(expr, xm, ym)) / (2 * step)


def test_polynomial_rule():
    expr = parse_expression("x1*y1 - 0.5*y1^2")
    d = differentiate(expr, Var("y", 0))
    # d/dy1 = x1 - y1
    for x, y in [(0.3, 0.7), (1.0, 1.0), (-2.0, 0.5)]:
        assert evaluate(d, [x], [y]) == pytest.approx(x - y, abs=1e-14)


def test_constant_rule():
    d = differentiate(Const(3.0), Var("x", 0))
    assert evaluate(d, [1.0], [1.0]) == 0.0


def test_exp_derivative_matches_fd():
    expr = parse_expression("exp(x1*y1)")
    d = differentiate(expr, Var("x", 0))
    val = evaluate(d, [1.0], [2.0])
    # frozen via the FD oracle: y1 * e^2 at (1, 2)
    assert val == pytest.approx(14.7781121978613, abs=1e-10)
    assert val == pytest.approx(central_fd(expr, [1.0], [2.0], Var("x", 0)), rel=1e-6)


def test_division_and_chain_rules_against_fd():
    rng = np.random.default_rng(7)
    exprs = [
        "sin(x1)*cos(y1) + x1/(y1 + 2)",
        "sqrt(x1 + 3)*exp(y1/4)",
        "log(x1 + 2.5) - y1^3/(x1 + 4)",
    ]
    for text in exprs:
        expr = parse_expression(text)
        for var in (Var("x", 0), Var("y", 0)):
            d = differentiate(expr, var)
            for _ in range(5):
                x = [float(rng.uniform(-1, 1))]
                y = [float(rng.uniform(-1, 1))]
                got = evaluate(d, x, y)
                want = central_fd(expr, x, y, var)
                assert got == pytest.approx(want, rel=1e-6, abs=1e-8)


def random_polynomial(rng, nvars=3, degree=4):
    """Random polynomial text in up to three variables (x1, y1, y2)."""
    vars_ = ["x1", "y1", "y2"][:nvars]
    terms = []
    for _ in range(int(rng.integers(1, 6))):
        coef = rng.uniform(-2, 2)
        powers = rng.integers(0, degree + 1, size=len(vars_))
        while powers.sum() > degree:
            powers[rng.integers(0, len(vars_))] = 0
        factors = [f"{coef:.6f}"]
        for v, k in zip(vars_, powers):
            for _ in range(int(k)):
                factors.append(v)
        terms.append("*".join(factors))
    return " + ".join(terms)


def test_random_polynomials_match_fd():
    rng = np.random.default_rng(0)
    for _ in range(60):
        text = random_polynomial(rng)
        expr = parse_expression(text)
        var = (Var("x", 0), Var("y", 0), Var("y", 1))[int(rng.integers(0, 3))]
        d = differentiate(expr, var)
        x = [float(rng.uniform(-1, 1))]
        y = [float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))]
        got = evaluate(d, x, y)
        want = central_fd(expr, x, y, var)
        assert abs(got - want) <= 1e-6 * max(1.0, abs(got))


def test_derivative_is_closed_under_differentiation():
    expr = parse_expression("exp(x1*y1) + sin(y1)^2")
    d1 = differentiate(expr, Var("y", 0))
    d2 = differentiate(d1, Var("y", 0))
    val = evaluate(d2, [0.5], [0.25])
    xp = central_fd(d1, [0.5], [0.25], Var("y", 0))
    assert val == pytest.approx(xp, rel=1e-6, abs=1e-8)


def test_print_parse_round_trip():
    texts = [
        "x1*y1 - 0.5*y1^2",
        "-(y1-x1)^2",
        "sin(x1) + cos(y1)*exp(x1/2) - sqrt(y1 + 3)",
        "x1^2^3 - (x1 + y1)*(x1 - y1)",
        "1 - x1",
    ]
    for text in texts:
        tree = parse_expression(text)
        printed = to_string(tree)
        assert parse_expression(printed) == tree


def test_unary_minus_precedence():
    # -x^2 must parse as -(x^2)
    expr = parse_expression("-x1^2")
    assert evaluate(expr, [3.0], [0.0]) == -9.0


def test_power_right_associative():
    expr = parse_expression("x1^2^3")
    assert evaluate(expr, [2.0], [0.0]) == 2.0**8


def test_domain_errors():
    with pytest.raises(DomainError):
        evaluate(parse_expression("log(x1)"), [-1.0], [0.0])
    with pytest.raises(DomainError):
        evaluate(parse_expression("sqrt(x1)"), [-1.0], [0.0])
    with pytest.raises(DomainError):
        evaluate(parse_expression("1/x1"), [0.0], [0.0])
    # permissive mode lets the grid oracle mask the result instead
    v = evaluate(parse_expression("log(x1)"), np.array([-1.0]), [0.0], strict=False)
    assert np.isnan(v)


def test_parse_errors_carry_position():
    with pytest.raises(ExpressionError):
        parse_expression("x1 + + * y1")
    with pytest.raises(ExpressionError):
        parse_expression("frob(x1)")
    with pytest.raises(ExpressionError):
        parse_expression("(x1 + y1")


def test_array_evaluation_broadcasts():
    expr = parse_expression("x1*y1 - 0.5*y1^2")
    ys = np.linspace(-1, 1, 11)
    vals = evaluate(expr, [0.3], [ys])
    assert vals.shape == (11,)
    assert vals[5] == pytest.approx(0.0)  # y = 0
