import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ROOT = Path(__file__).resolve().parents[1]

# criterion number -> (title, passed, detail)
ACCEPTANCE = {}


@pytest.fixture
def record():
    """Register the outcome of one acceptance criterion for the terminal summary."""

    def rec(num, title, passed, detail=""):
        ACCEPTANCE[num] = (title, bool(passed), detail)
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {num}: {title}" + (f" ({detail})" if detail else "")
        print(line)
        return passed

    return rec


@pytest.fixture
def repo_root():
    return ROOT


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {num:>2}. {title}" + (f"  [{detail}]" if detail else ""))
