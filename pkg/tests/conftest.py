import numpy as np
import pytest

from ddlab.discretization import Discretization, build_space
from ddlab.mesh import build_structured_mesh
from ddlab.problems import canonical_test_case

ACCEPTANCE_LINES = []


def record(criterion: str, passed: bool, detail: str = "") -> None:
    """Register one acceptance line for the terminal summary."""
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}" + (f": {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_disc(case: str, n: int, scheme: str = None, degree: int = None) -> Discretization:
    tc = canonical_test_case(case)
    scheme = scheme or tc.default_scheme
    degree = degree or (tc.default_degree if scheme == "th" else 1)
    return Discretization(build_space(build_structured_mesh(tc.shape, n), scheme, degree), tc.problem)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
