"""Shared pytest plumbing.

The acceptance suite records one verdict line per criterion; they are
replayed in a dedicated section after the run so the gate status is
visible without scrolling through the full log.
"""

import pytest

CRITERION_LINES = []


@pytest.fixture(scope="session")
def criterion_log():
    return CRITERION_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
