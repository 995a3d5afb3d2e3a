import numpy as np
import pytest

from rnmod import AtomicProbabilitySpace, FiberSpec


@pytest.fixture
def space3():
    return AtomicProbabilitySpace([0.5, 0.3, 0.2])


@pytest.fixture
def euclid2():
    return FiberSpec(2, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Record one PASS/FAIL line per acceptance criterion."""

    def log(name: str, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} {name}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
