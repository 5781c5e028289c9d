import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

from parsimplex.generate import random_suite  # noqa: E402

DATA = HERE / "data"
OPTIMAL_FIXTURES = ["diet", "features", "kleeminty3", "testprob", "trnsport", "wyndor"]
CRITERIA: dict = {}


@pytest.fixture(scope="session")
def suite():
    return random_suite(50)


@pytest.fixture(scope="session")
def data_dir():
    return DATA


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"ACCEPTANCE {number:>2}: {'PASS' if passed else 'FAIL'} - {detail}"
    CRITERIA[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
