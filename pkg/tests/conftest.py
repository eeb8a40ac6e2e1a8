import pytest

_LINES = []


@pytest.fixture
def record():
    """Log one acceptance line (shown in the terminal summary) and fail the test if ``ok`` is false."""

    def _record(name, ok, detail):
        _LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        print(_LINES[-1])
        assert ok, detail

    return _record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
