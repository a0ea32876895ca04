import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ocmflow.sphere import ScalarField, build_grid

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid32():
    return build_grid(2, 32, 64)


@pytest.fixture(scope="session")
def grid64():
    return build_grid(2, 64, 128)


def field(grid, func):
    """Field from ``func(theta, phi)`` on S^2 or ``func(theta)`` on S^1."""
    return ScalarField(grid, grid.evaluate(func))


def xyz_field(grid, func):
    return ScalarField(grid, grid.evaluate_xyz(func))


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
