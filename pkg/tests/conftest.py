import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def criterion(request):
    """record(k, passed, detail) stores one acceptance line for the summary."""
    def record(k, passed, detail):
        request.config.stash[_RESULTS][k] = (bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        passed, detail = results[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if passed else 'FAIL'}  {detail}")
