import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from constellation.synth import generate

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def pool():
    return [generate(40, seed=1000 + s, id=f"pool{s}") for s in range(50)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


# one "PASS/FAIL criterion N: ..." line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
