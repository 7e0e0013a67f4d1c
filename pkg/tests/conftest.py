from __future__ import annotations

import numpy as np
import pytest

from entroflow.harness import convergence_study, load_scenario, run_scenario
from entroflow.heat_field import HeatSolution

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def kernel2():
    return HeatSolution.kernel(2)


@pytest.fixture
def kernel3():
    return HeatSolution.kernel(3)


@pytest.fixture
def mixture2():
    return HeatSolution([1.0, 0.6, 0.4], [[0.0, 0.0], [0.4, -0.2], [-0.3, 0.35]], [0.0, 0.2, 0.5])


@pytest.fixture
def mixture3():
    return HeatSolution([1.0, 0.6, 0.4], [[0.0, 0.0, 0.0], [0.4, -0.2, 0.1], [-0.3, 0.35, -0.25]],
                        [0.0, 0.2, 0.5])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class _ScenarioCache:
    """Each bundled scenario (and study) runs at most once per test session."""

    def __init__(self):
        self.reports = {}
        self.studies = {}

    def report(self, name):
        if name not in self.reports:
            self.reports[name] = run_scenario(load_scenario(name))
        return self.reports[name]

    def study(self, name):
        if name not in self.studies:
            self.studies[name] = convergence_study(load_scenario(name))
        return self.studies[name]


@pytest.fixture(scope="session")
def scenarios():
    return _ScenarioCache()


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
