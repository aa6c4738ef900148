import pytest

import acceptance_log
from gradprob import formula as F


@pytest.fixture(autouse=True)
def fresh_names():
    """Every test numbers fresh variables from zero."""
    with F.session():
        yield


def pytest_terminal_summary(terminalreporter):
    lines = acceptance_log.lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
