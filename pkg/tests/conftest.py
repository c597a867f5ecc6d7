import warnings

import pytest
from hypothesis import HealthCheck, settings

from punctured_robin.domains import ValidityWarning

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

# Filled by tests/test_acceptance.py; printed once at the end of the run.
ACCEPTANCE = {}


@pytest.fixture
def record_acceptance():
    def record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")
    return record


@pytest.fixture(autouse=True)
def _quiet_validity_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
