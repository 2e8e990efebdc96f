import numpy as np
import pytest

from minimaxcert.fixtures import fixture_text
from minimaxcert.problem import (
    CandidatePoint,
    ProblemFormatError,
    eval_bundle,
    parse_problem,
    problem_digest,
    serialize_problem,
)
from minimaxcert.expressions import evaluate


P1_TEXT = """\
dims 1 1 0 1 0 1
f = x1*y1 - 0.5*y1^2
g1 = y1 - 1
G1 = x1 - 2
"""

P2_TEXT = """\
dims 1 1 0 1 0 0
f = -(y1-x1)^2
g1 = y1
"""


def test_parse_p1_and_evaluate():
    spec = parse_problem(P1_TEXT)
    assert (spec.n, spec.m, spec.m1, spec.m2, spec.n1, spec.n2) == (1, 1, 0, 1, 0, 1)
    assert evaluate(spec.f, [1.0], [1.0]) == pytest.approx(0.5)


def test_parse_p2_and_evaluate():
    spec = parse_problem(P2_TEXT)
    assert evaluate(spec.f, [0.0], [0.0]) == 0.0


def test_y_variable_in_upper_constraint_rejected():
    bad = "dims 1 1 0 0 0 1\nf = x1\nG1 = y1\n"
    with pytest.raises(ProblemFormatError) as err:
        parse_problem(bad)
    assert "y1" in str(err.value)
    assert "line 3" in str(err.value)


def test_dimension_mismatches_rejected():
    with pytest.raises(ProblemFormatError):
        parse_problem("dims 1 1 0 2 0 0\nf = x1\ng1 = y1\n")  # missing g2
    with pytest.raises(ProblemFormatError):
        parse_problem("dims 1 1 0 0 0 0\nf = x1\ng1 = y1\n")  # undeclared g1
    with pytest.raises(ProblemFormatError):
        parse_problem("dims 1 1 0 0 0 0\nf = x2\n")  # x2 out of range


def test_syntax_error_carries_line():
    with pytest.raises(ProblemFormatError) as err:
        parse_problem("dims 1 1 0 0 0 0\nf = x1 + + y1\n")
    assert "line 2" in str(err.value)


def test_parse_serialize_parse_idempotent():
    for name in ("P1", "P2", "P3", "P4"):
        spec = parse_problem(fixture_text(name))
        text = serialize_problem(spec)
        again = parse_problem(text)
        assert again == spec
        assert serialize_problem(again) == text
        assert problem_digest(again) == problem_digest(spec)


def test_comments_and_blank_lines_ignored():
    spec = parse_problem("# header\n\ndims 1 1 0 0 0 0  # dims\nf = x1*y1 # objective\n")
    assert evaluate(spec.f, [2.0], [3.0]) == 6.0


def test_eval_bundle_p1_at_origin():
    spec = parse_problem(P1_TEXT)
    b = eval_bundle(spec, [0.0], [0.0])
    assert b.fy[0] == pytest.approx(0.0)
    assert b.fyy[0, 0] == pytest.approx(-1.0)
    assert b.g_jy[0, 0] == pytest.approx(1.0)
    assert b.g[0] == pytest.approx(-1.0)


def test_eval_bundle_p2_at_origin():
    spec = parse_problem(P2_TEXT)
    b = eval_bundle(spec, [0.0], [0.0])
    assert b.fyy[0, 0] == pytest.approx(-2.0)
    assert b.fyx[0, 0] == pytest.approx(2.0)


def test_cross_blocks_are_mutual_transposes():
    rng = np.random.default_rng(3)
    spec = parse_problem(
        "dims 2 2 0 1 0 0\n"
        "f = x1*y1 - 0.5*y1^2 + exp(x2*y2/4) - y2^2\n"
        "g1 = y1 + y2 - 1\n"
    )
    for _ in range(5):
        x = rng.uniform(-1, 1, 2)
        y = rng.uniform(-1, 1, 2)
        b = eval_bundle(spec, x, y)
        assert np.max(np.abs(b.fxy - b.fyx.T)) <= 1e-12
        assert np.max(np.abs(b.fxx - b.fxx.T)) <= 1e-12
        assert np.max(np.abs(b.fyy - b.fyy.T)) <= 1e-12


def test_candidate_validation():
    spec = parse_problem(P1_TEXT)
    cand = CandidatePoint([0.0], [0.0], lam=[0.0])
    cand.validate_against(spec)
    with pytest.raises(ValueError):
        CandidatePoint([0.0], [0.0], lam=[np.inf])
    with pytest.raises(ValueError):
        CandidatePoint([0.0, 1.0], [0.0]).validate_against(spec)


def test_domain_error_reports_expression():
    spec = parse_problem("dims 1 1 0 0 0 0\nf = log(x1)\n")
    with pytest.raises(Exception) as err:
        eval_bundle(spec, [-1.0], [0.0])
    assert "log" in str(err.value)
