"""Reference problems shipped with the package (P1..P4)."""

from __future__ import annotations

from importlib import resources

from .problem import ProblemSpec, parse_problem

FIXTURE_NAMES = ("P1", "P2", "P3", "P4")


def fixture_text(name: str) -> str:
    if name not in FIXTURE_NAMES:
        raise KeyError(f"unknown fixture {name!r}")
    ref = resources.files("minimaxcert").joinpath("problems", f"{name}.prob")
    return ref.read_text(encoding="utf-8")


def load_fixture(name: str) -> ProblemSpec:
    return parse_problem(fixture_text(name))
