from __future__ import annotations

import pytest

from bracketlab.model import build_design


@pytest.fixture(scope="session")
def risk():
    return build_design("risk")


@pytest.fixture(scope="session")
def social():
    return build_design("social")


@pytest.fixture(scope="session")
def shopping():
    return build_design("shopping")


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; the summary prints them in order after the run."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
