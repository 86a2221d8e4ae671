import pytest
from hypothesis import strategies as st

from superchi.model import DampingRates

STANDARD_RATES = [DampingRates(1.0, 0.0, 0.1), DampingRates(1.0, 0.05, 0.05),
              DampingRates(1.0, 0.1, 0.0)]


def floats(lo, hi):
    # subnormal rates only exercise float underflow, not the model
    return st.floats(lo, hi, allow_subnormal=False)


_acceptance_lines: list[str] = []


@pytest.fixture
def acceptance_report():
    def record(label: str, passed: bool, detail: str) -> None:
        _acceptance_lines.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
