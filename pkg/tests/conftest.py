import numpy as np
import pytest

from pxnehari.config import ProblemConfig, build_problem, desk_config
from pxnehari.grid import Grid

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def unit_interval():
    return Grid((1.0,), (65,))


@pytest.fixture(scope="session")
def unit_square():
    return Grid((1.0, 1.0), (33, 33))


@pytest.fixture(scope="session")
def desk():
    return build_problem(desk_config(lam=100.0))


@pytest.fixture(scope="session")
def desk_solution(desk):
    from pxnehari.solver import solve_three

    return solve_three(desk, escalate=True)


def line_config(**overrides) -> ProblemConfig:
    """1D subcritical problem: p = 2, q = 4, r = 3.5, s = 2.5."""
    cfg = dict(
        extents=[1.0],
        resolution=[65],
        p=2.0,
        q=4.0,
        nonlinearity={"r": 3.5, "s": 2.5, "constants": None},
        lam=5.0,
    )
    cfg.update(overrides)
    return ProblemConfig(**cfg)
