"""Shared fixtures: one on-disk cache for the whole session, tables and kernels loaded once."""

import os
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
os.environ.setdefault("QTWIST_CACHE_DIR", str(ROOT / ".cache"))

from qtwist.cache import load_kernel, load_table  # noqa: E402

# table lengths that cover every test; generated on the first run, then read back
N12 = 10**7
N18 = 2 * 10**6

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def cache_dir():
    path = Path(os.environ["QTWIST_CACHE_DIR"])
    path.mkdir(parents=True, exist_ok=True)
    return path


@pytest.fixture(scope="session")
def table12(cache_dir):
    return load_table(12, N12, cache_dir)


@pytest.fixture(scope="session")
def table18(cache_dir):
    return load_table(18, N18, cache_dir)


@pytest.fixture(scope="session")
def kernels(cache_dir):
    memo = {}

    def get(weight, m, g="one"):
        key = (weight, m, g)
        if key not in memo:
            memo[key] = load_kernel(weight, m, g, cache_dir)
        return memo[key]
    return get


@pytest.fixture
def record():
    """Log one line per acceptance criterion; the lines are echoed in the terminal summary."""
    def log(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        return passed
    return log


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
