import pytest

from dvhj.profiles import Params


def pytest_configure(config):
    config.criteria_lines = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.criteria_lines
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])


@pytest.fixture
def criterion(request):
    """Record the one-line verdict of an acceptance criterion."""

    def record(k, ok, detail):
        line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        request.config.criteria_lines[k] = line
        return ok

    return record


@pytest.fixture
def p3q2():
    return Params(3.0, 2.0, 1)
