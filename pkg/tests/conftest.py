import sys
from pathlib import Path

import pytest

from mutred import CoverageMatrix, KillMatrix, SuiteChain
from mutred.synth import example_matrix, example_path

sys.path.insert(0, str(Path(__file__).parent))

A = ("m1", "m2")
B = ("m3", "m4")
CANONICAL = "t1,t2,t3,t4;t1,t2;t1"


@pytest.fixture
def kill():
    return example_matrix()


@pytest.fixture
def cover(kill):
    return CoverageMatrix.from_kill(kill)


@pytest.fixture
def example_csv():
    return str(example_path())


@pytest.fixture
def chain():
    return SuiteChain.parse(CANONICAL)


def random_kill(rng, n_mutants, n_tests, density=0.3, kind=KillMatrix):
    cells = rng.random((n_mutants, n_tests)) < density
    return kind(
        tuple(f"m{i}" for i in range(n_mutants)), tuple(f"t{j}" for j in range(n_tests)), cells
    )


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
