import pytest

# Filled by tests/test_acceptance.py; one (criterion, passed, detail) per check.
ACCEPTANCE_RESULTS = []


@pytest.fixture
def record():
    def _record(name, passed, detail):
        ACCEPTANCE_RESULTS.append((name, bool(passed), detail))
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
