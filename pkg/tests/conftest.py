import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# acceptance outcomes, filled by test_acceptance and echoed at the end of the run
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    def record(number: int, name: str, passed: bool, detail: str = "", soft: bool = False):
        tag = "PASS" if passed else ("SOFT-FAIL" if soft else "FAIL")
        line = f"[{tag}] criterion {number:2d} {name}: {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
