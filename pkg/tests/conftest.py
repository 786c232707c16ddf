"""Collects one pass/fail line per acceptance criterion and prints them at
the end of the session."""
import pytest

_RESULTS = {}


@pytest.fixture
def criterion():
    def record(k, passed, detail):
        _RESULTS[k] = (bool(passed), detail)
        print(f"criterion {k:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(_RESULTS):
        ok, detail = _RESULTS[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
