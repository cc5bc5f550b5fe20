from pathlib import Path

import pytest

from sievewalk.sieve import GeneratorFamily, SieveSystem

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def squarefree_system(offsets=(0,)):
    return SieveSystem(GeneratorFamily.prime_powers(2), tuple(offsets))


@pytest.fixture
def squarefree():
    return squarefree_system()


@pytest.fixture
def k2_h101():
    return squarefree_system((-1, 0, 1))


@pytest.fixture
def configs_dir():
    return CONFIGS


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(results):
        terminalreporter.write_line(line)
