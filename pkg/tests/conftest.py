from __future__ import annotations

import pytest

from support import ACCEPTANCE_LINES, make_runtime


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checklist")
        for line in ACCEPTANCE_LINES:
            terminalreporter.line(line)


@pytest.fixture
def runtime():
    """Shipped testbed at a near-zero pacing scale."""
    return make_runtime()


@pytest.fixture
def quick_runtime():
    """Shipped testbed with constant near-zero device latency, for tests that
    care about behaviour rather than timing distributions."""
    return make_runtime(constant_s=1e-9)
