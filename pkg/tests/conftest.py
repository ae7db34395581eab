import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from odfc import make_system  # noqa: E402

NONLINEAR = ["quad", "cubic_plus", "cubic_minus", "sinsq"]
BUILTINS = ["linear"] + NONLINEAR


@pytest.fixture
def linear2():
    return make_system("linear", 0.0, 2.0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
