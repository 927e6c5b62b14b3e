"""Shared fixtures: solvers are expensive to set up, so build them once."""
import numpy as np
import pytest

from dualprobe.domain import WaveConfig, constant_ball, smooth_bump
from dualprobe.foldy_lax import ForwardModel
from dualprobe.solver import LippmannSchwingerSolver

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ball():
    return constant_ball(1.2, 1.0)


@pytest.fixture(scope="session")
def bump():
    return smooth_bump(1.5, 1.0)


@pytest.fixture(scope="session")
def ball_solver(ball):
    return LippmannSchwingerSolver(ball, 1.0, cells_per_axis=24)


@pytest.fixture(scope="session")
def bump_solver(bump):
    return LippmannSchwingerSolver(bump, 1.0, cells_per_axis=24)


@pytest.fixture(scope="session")
def waves6():
    return WaveConfig.fibonacci(1.0, 6)


@pytest.fixture(scope="session")
def ball_model(ball, ball_solver, waves6):
    return ForwardModel(ball, waves6, solver=ball_solver, green_model="surrogate")


@pytest.fixture(scope="session")
def vacuum_model(waves6):
    return ForwardModel(constant_ball(1.0, 1.0), waves6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
