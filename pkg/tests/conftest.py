import pytest

from pauli_torsion.acceptance import format_line

_LINES = []


@pytest.fixture
def record_criterion():
    """Collects acceptance results so the PASS/FAIL lines appear in the terminal summary."""
    def record(result):
        line = format_line(result)
        _LINES.append(line)
        print(line)
        return result
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
