import os
from pathlib import Path

import pytest

from gapde.experiment import solve_cached
from gapde.solvers import ProblemSpec

KINDS = ("kdv", "burgers", "wave", "chaffee_infante")


@pytest.fixture(scope="session")
def cache_dir():
    """Reference solutions are cached on disk; set GAPDE_CACHE to relocate."""
    path = Path(os.environ.get("GAPDE_CACHE", Path(__file__).parent / ".cache"))
    path.mkdir(parents=True, exist_ok=True)
    return path


@pytest.fixture(scope="session")
def fields(cache_dir):
    store = {}

    def get(kind):
        if kind not in store:
            store[kind] = solve_cached(ProblemSpec(kind), cache_dir)
        return store[kind]

    return get


_CRITERIA = {}


@pytest.fixture(scope="session")
def criterion():
    """Record ``criterion(number, passed, detail)``; summarized at the end of the run."""

    def record(number, passed, detail):
        previous = _CRITERIA.get(number)
        if previous is not None:
            passed = passed and previous[0]
            detail = previous[1] + "; " + detail
        _CRITERIA[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
