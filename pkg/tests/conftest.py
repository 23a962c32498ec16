import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance_line():
    def record(k: int, line: str) -> None:
        _LINES[k] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_LINES):
        terminalreporter.write_line(_LINES[k])
