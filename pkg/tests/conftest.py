import pytest

_GATE_LINES = []


@pytest.fixture
def gate_report():
    """Record one PASS/FAIL line per acceptance criterion for the summary."""

    def report(name: str, ok: bool, detail: str = ""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
        _GATE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _GATE_LINES:
        terminalreporter.section("acceptance gate")
        for line in _GATE_LINES:
            terminalreporter.write_line(line)
