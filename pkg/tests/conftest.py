import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    """Record a ``PASS``/``FAIL`` line for an acceptance criterion, then assert."""

    def _record(number: int, name: str, ok: bool, detail: str = "") -> None:
        line = f"criterion {number} ({name}): {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
