import numpy as np
import pytest

from nstbench.bench.patterns import pattern_pair


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_images():
    """Procedural 64x64 content/style pair shared across slow tests."""
    return pattern_pair(64, 0)
