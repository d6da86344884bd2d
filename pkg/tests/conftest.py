import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    def record(number, ok, detail):
        line = f"AC{number:<2} {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok
    return record


@pytest.fixture
def note():
    def record(text):
        line = f"      note: {text}"
        print(line)
        ACCEPTANCE_LINES.append(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
