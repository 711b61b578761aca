import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("omegalab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("omegalab")

ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def record_criterion():
    """Store one ``criterion n: PASS|FAIL detail`` line for the terminal summary."""

    def record(number: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[number])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
