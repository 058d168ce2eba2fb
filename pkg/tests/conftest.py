import pytest

from wavecrit.model import ModelParams
from wavecrit.solver import Problem, SolveConfig, iterate

ACCEPTANCE_LINES: dict = {}


def record_acceptance(number: int, passed: bool, detail: str):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


@pytest.fixture(scope="session")
def default_problem():
    return Problem.build(ModelParams())


@pytest.fixture(scope="session")
def default_solution(default_problem):
    profile, trace = iterate(default_problem, SolveConfig())
    return default_problem, profile, trace


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
