import pytest

_LINES = []


@pytest.fixture
def criterion():
    """Record one summary line per acceptance criterion."""
    def record(number, passed, detail):
        _LINES.append((number, f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"))
        assert passed, detail
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_LINES):
            terminalreporter.write_line(line)
