"""Shared fixtures; collects acceptance results for the terminal summary."""

import numpy as np
import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance_record():
    """Record a named acceptance-criterion outcome for the summary block."""

    def record(name: str, passed: bool, detail: str = ""):
        _ACCEPTANCE.append((name, bool(passed), detail))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        line = f"ACCEPTANCE {name}: {'PASS' if passed else 'FAIL'}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
