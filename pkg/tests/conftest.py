"""Shared pytest plumbing: the acceptance suite reports one line per criterion."""
import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def record():
    """record(n, name, ok, detail) stores a PASS/FAIL line and returns ok."""

    def _record(n: int, name: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {n} {'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
        _ACCEPTANCE[n] = line
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
