from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from servers import FixtureSite  # noqa: E402


@pytest.fixture
def fixture_site():
    with FixtureSite() as site:
        yield site


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if hasattr(report, "wasxfail"):
        status = "FAIL (expected; see test reason)"
    elif report.passed:
        status = "PASS"
    else:
        status = "FAIL"
    print(f"\n[acceptance] {name}: {status}", flush=True)
