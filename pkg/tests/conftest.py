import contextlib

import pytest

ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Context manager recording one pass/fail line per acceptance criterion."""

    @contextlib.contextmanager
    def record(number, label):
        ACCEPTANCE[number] = (label, False, "")
        details = {}
        yield details
        ACCEPTANCE[number] = (label, True, details.get("note", ""))

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        label, ok, note = ACCEPTANCE[number]
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {label}"
        terminalreporter.write_line(line + (f"  ({note})" if note else ""))
