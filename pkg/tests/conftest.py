import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; printed together at the end of the session."""

    def record(label: str, ok: bool, detail: str = "", expected_fail: bool = False):
        status = "PASS" if ok else ("FAIL (expected, see ledger)" if expected_fail else "FAIL")
        _LINES.append(f"{label}: {status}" + (f" -- {detail}" if detail else ""))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _LINES:
        terminalreporter.write_line(line)
