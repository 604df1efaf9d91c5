import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# one line per acceptance criterion, collected by tests/test_acceptance.py
CRITERIA: dict[int, str] = {}


@pytest.fixture
def report():
    def emit(number: int, passed: bool, text: str):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {text}"
        CRITERIA[number] = line
        print(line)
        assert passed, line
    return emit


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
