import os

import pytest
from hypothesis import HealthCheck, settings

from sbscavity.core import CavityFiberConfig

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=300,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def default_cavity():
    """The 10 m room-temperature cavity with the simulation parameters."""
    return CavityFiberConfig()


@pytest.fixture(scope="session")
def short_cavity():
    """A 1 m cavity: same physics, ten times fewer grid elements."""
    return CavityFiberConfig.from_fiber_length(1.0)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list = []


@pytest.fixture
def acceptance_report():
    def report(number, ok, detail):
        ACCEPTANCE_LINES.append((number, "PASS" if ok else "FAIL", detail))
        print(f"ACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n, verdict, detail in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(f"{n:>2} {verdict}  {detail}")
