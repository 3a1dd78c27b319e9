import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record a named acceptance check; the summary is printed at the end of the run."""

    def record(name: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((name, bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {name} {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
