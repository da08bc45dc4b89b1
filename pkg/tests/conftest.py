import pytest

_lines: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion and return the flag."""

    def record(num: int, name: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {num:>2} [{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
        _lines[num] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _lines:
        terminalreporter.section("acceptance criteria")
        for num in sorted(_lines):
            terminalreporter.write_line(_lines[num])
