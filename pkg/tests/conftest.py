import pytest

ACCEPTANCE_LINES = {}


@pytest.fixture
def verdict(request):
    """Record the one-line acceptance verdict of the calling test."""
    def record(key, ok, detail):
        line = f"{key} {'PASS' if ok else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES[key] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[2:])):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
