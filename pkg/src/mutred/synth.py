"""Synthetic kill/coverage/operator fixtures."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import InputError
from .matrix import CoverageMatrix, KillMatrix, read_matrix

PIT_DEFAULTS = (
    "CONDITIONALS_BOUNDARY",
    "INCREMENTS",
    "INVERT_NEGS",
    "MATH",
    "NEGATE_CONDITIONALS",
    "RETURN_VALS",
    "VOID_METHOD_CALL",
)


@dataclass(frozen=True)
class SynthSpec:
    n_mutants: int
    n_tests: int
    cover_density: float = 0.3
    kill_given_cover: float = 0.5
    n_operators: int = len(PIT_DEFAULTS)
    seed: int = 0

    def __post_init__(self):
        if self.n_mutants < 1 or self.n_tests < 1:
            raise InputError("need at least one mutant and one test")
        for name in ("cover_density", "kill_given_cover"):
            p = getattr(self, name)
            if not 0 < p <= 1:
                raise InputError(f"{name} must lie in (0, 1], got {p}")
        if self.n_operators < 1:
            raise InputError("need at least one operator label")


def operator_labels(n: int) -> tuple[str, ...]:
    """PIT's seven default mutator names first, then ``OP7``, ``OP8``, ..."""
    return tuple(PIT_DEFAULTS[:n]) + tuple(f"OP{i}" for i in range(len(PIT_DEFAULTS), n))


def generate(spec: SynthSpec) -> tuple[KillMatrix, CoverageMatrix, dict[str, str]]:
    """Random coverage, kill-given-cover and operator labels; same seed, same output."""
    rng = np.random.default_rng(spec.seed)
    shape = (spec.n_mutants, spec.n_tests)
    cover = rng.random(shape) < spec.cover_density
    kill = cover & (rng.random(shape) < spec.kill_given_cover)
    width = len(str(max(spec.n_mutants, spec.n_tests)))
    mutants = tuple(f"m{i:0{width}d}" for i in range(1, spec.n_mutants + 1))
    tests = tuple(f"t{j:0{width}d}" for j in range(1, spec.n_tests + 1))
    labels = operator_labels(spec.n_operators)
    ops = {m: labels[i] for m, i in zip(mutants, rng.integers(len(labels), size=spec.n_mutants))}
    return KillMatrix(mutants, tests, kill), CoverageMatrix(mutants, tests, cover), ops


def example_path():
    """Path of the bundled 5 x 4 worked-example kill matrix."""
    return resources.files("mutred") / "data" / "example.csv"


def example_matrix() -> KillMatrix:
    with resources.as_file(example_path()) as path:
        return read_matrix(path, KillMatrix)
