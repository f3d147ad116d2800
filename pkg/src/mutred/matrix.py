"""Kill/coverage relation matrices, mutation scores and test-suite chains.

A matrix is a dense boolean ``numpy`` array with mutants as rows and tests as
columns.  Ids are opaque strings; their order is the file order and every
ordered output of this module follows it.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, InputError

TestSuite = frozenset  # frozenset[str]; a plain alias keeps signatures readable


class Sign(enum.Enum):
    """Outcome of comparing the scores of two suites."""

    GT = ">"
    EQ = "="
    LT = "<"

    @classmethod
    def compare(cls, a: float, b: float) -> "Sign":
        if a > b:
            return cls.GT
        if a < b:
            return cls.LT
        return cls.EQ


def _check_ids(ids: Sequence[str], what: str) -> tuple[str, ...]:
    ids = tuple(str(i) for i in ids)
    if not ids:
        raise InputError(f"{what} ids must be non-empty")
    if len(set(ids)) != len(ids):
        seen: set[str] = set()
        dup = next(i for i in ids if i in seen or seen.add(i))
        raise InputError(f"duplicate {what} id {dup!r}")
    return ids


@dataclass(frozen=True, eq=False)
class RelationMatrix:
    """Boolean mutant x test relation.  Immutable once built."""

    mutant_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    cells: np.ndarray
    _mutant_pos: dict = field(init=False, repr=False)
    _test_pos: dict = field(init=False, repr=False)

    def __post_init__(self):
        mutant_ids = _check_ids(self.mutant_ids, "mutant")
        test_ids = _check_ids(self.test_ids, "test")
        cells = np.array(self.cells, dtype=bool, copy=True)
        if cells.shape != (len(mutant_ids), len(test_ids)):
            raise InputError(
                f"cells have shape {cells.shape}, expected "
                f"({len(mutant_ids)}, {len(test_ids)})"
            )
        cells.setflags(write=False)
        object.__setattr__(self, "mutant_ids", mutant_ids)
        object.__setattr__(self, "test_ids", test_ids)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "_mutant_pos", {m: i for i, m in enumerate(mutant_ids)})
        object.__setattr__(self, "_test_pos", {t: j for j, t in enumerate(test_ids)})

    @classmethod
    def from_rows(cls, rows: Mapping[str, Iterable[int]], test_ids: Sequence[str]):
        """Build from ``{mutant_id: [0/1 per test]}`` preserving mapping order."""
        return cls(tuple(rows), tuple(test_ids), np.array([list(r) for r in rows.values()]))

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.mutant_ids == other.mutant_ids
            and self.test_ids == other.test_ids
            and np.array_equal(self.cells, other.cells)
        )

    __hash__ = None

    def mutant_rows(self, mutants: Iterable[str]) -> np.ndarray:
        try:
            return np.array([self._mutant_pos[m] for m in mutants], dtype=np.intp)
        except KeyError as exc:
            raise InputError(f"unknown mutant id {exc.args[0]!r}") from None

    def test_columns(self, tests: Iterable[str]) -> np.ndarray:
        try:
            return np.array([self._test_pos[t] for t in tests], dtype=np.intp)
        except KeyError as exc:
            raise InputError(f"unknown test id {exc.args[0]!r}") from None

    def ordered_tests(self, tests: Iterable[str]) -> tuple[str, ...]:
        """The given tests sorted into matrix column order."""
        cols = np.sort(self.test_columns(tests))
        return tuple(self.test_ids[j] for j in cols)

    def ordered_mutants(self, mutants: Iterable[str]) -> tuple[str, ...]:
        rows = np.sort(self.mutant_rows(mutants))
        return tuple(self.mutant_ids[i] for i in rows)

    def tests_of(self, mutant: str) -> frozenset[str]:
        """Tests related to ``mutant`` (killing or covering it)."""
        (i,) = self.mutant_rows([mutant])
        return frozenset(self.test_ids[j] for j in np.flatnonzero(self.cells[i]))

    def has_same_ids(self, other: "RelationMatrix") -> bool:
        return self.mutant_ids == other.mutant_ids and self.test_ids == other.test_ids


class KillMatrix(RelationMatrix):
    """``cells[i, j]`` is true when test ``j`` kills mutant ``i``."""


class CoverageMatrix(RelationMatrix):
    """``cells[i, j]`` is true when test ``j`` covers mutant ``i``."""

    @classmethod
    def from_kill(cls, kill: KillMatrix) -> "CoverageMatrix":
        return cls(kill.mutant_ids, kill.test_ids, kill.cells)


def check_pair(kill: KillMatrix, cover: CoverageMatrix) -> None:
    """Raise unless ``cover`` shares ids with ``kill`` and kill implies cover."""
    if not kill.has_same_ids(cover):
        raise InputError("kill and coverage matrices have different mutant/test ids")
    bad = np.argwhere(kill.cells & ~cover.cells)
    if len(bad):
        i, j = bad[0]
        raise InputError(
            f"{kill.mutant_ids[i]} is killed but not covered by {kill.test_ids[j]} "
            f"({len(bad)} such cells)"
        )


# -- scores -----------------------------------------------------------------


def killed_rows(cells: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Boolean vector over rows: killed by at least one of ``cols``."""
    if len(cols) == 0:
        return np.zeros(cells.shape[0], dtype=bool)
    return cells[:, cols].any(axis=1)


def killed_mutants(matrix: KillMatrix, suite: Iterable[str]) -> frozenset[str]:
    cols = matrix.test_columns(suite)
    hit = killed_rows(matrix.cells, cols)
    return frozenset(matrix.mutant_ids[i] for i in np.flatnonzero(hit))


def mutation_score(matrix: KillMatrix, suite: Iterable[str]) -> float:
    """Fraction of all mutants in ``matrix`` killed by ``suite``.

    Equivalent mutants are not filtered: the denominator is every row.  An
    empty suite kills nothing and scores 0.
    """
    if matrix.shape[0] == 0:
        raise DomainError("mutation score of an empty mutant set")
    cols = matrix.test_columns(suite)
    return float(killed_rows(matrix.cells, cols).mean())


def restrict(matrix: RelationMatrix, mutants: Iterable[str]) -> RelationMatrix:
    """Row-filtered copy keeping the matrix's own mutant order."""
    mutants = list(mutants)
    if not mutants:
        raise InputError("cannot restrict to an empty mutant subset")
    rows = np.sort(matrix.mutant_rows(set(mutants)))
    return type(matrix)(
        tuple(matrix.mutant_ids[i] for i in rows), matrix.test_ids, matrix.cells[rows]
    )


def filter_uncovered(kill: KillMatrix, cover: CoverageMatrix) -> tuple[str, ...]:
    """Mutants covered by at least one test, in matrix order.

    Uncovered mutants can never be killed, so they are dropped before any
    strategy runs; the result is the strategy universe.
    """
    if not kill.has_same_ids(cover):
        raise InputError("kill and coverage matrices have different mutant/test ids")
    rows = np.flatnonzero(cover.cells.any(axis=1))
    return tuple(cover.mutant_ids[i] for i in rows)


# -- suite chains -----------------------------------------------------------


@dataclass(frozen=True)
class SuiteChain:
    """Strictly nested suites T_0 > T_1 > ... > T_k, each half its parent."""

    suites: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        suites = tuple(tuple(s) for s in self.suites)
        if len(suites) < 2:
            raise DomainError("a chain needs at least two suites (k >= 1)")
        for i, (outer, inner) in enumerate(zip(suites, suites[1:])):
            if len(inner) != len(outer) // 2:
                raise InputError(
                    f"suite {i + 1} has {len(inner)} tests, expected {len(outer) // 2}"
                )
            if not set(inner) < set(outer):
                raise InputError(f"suite {i + 1} is not a proper subset of suite {i}")
        if len(suites[-1]) != 1:
            raise InputError("the last suite of a chain must hold exactly one test")
        object.__setattr__(self, "suites", suites)

    @property
    def k(self) -> int:
        return len(self.suites) - 1

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.suites)

    @classmethod
    def parse(cls, text: str) -> "SuiteChain":
        """Parse ``"t1,t2,t3,t4;t1,t2;t1"``."""
        suites = [tuple(t.strip() for t in part.split(",") if t.strip()) for part in text.split(";")]
        return cls(tuple(suites))

    def format(self) -> str:
        return ";".join(",".join(s) for s in self.suites)


def _ordered(suite: Iterable[str]) -> list[str]:
    # Sets iterate in hash order, which varies between interpreter runs.
    if isinstance(suite, (list, tuple)):
        return list(suite)
    return sorted(suite)


def half_sample_chain(suite: Iterable[str], rng: np.random.Generator) -> SuiteChain:
    """Draw a continuous half-sample chain starting from ``suite``.

    Each step keeps a uniformly random ``floor(n / 2)`` subset of the previous
    suite until a single test is left, so ``k = floor(log2 |suite|)``.
    """
    current = _ordered(suite)
    if len(current) < 2:
        raise DomainError("half-sample chains need a suite of at least 2 tests")
    suites = [tuple(current)]
    while len(current) > 1:
        keep = np.sort(rng.choice(len(current), size=len(current) // 2, replace=False))
        current = [current[i] for i in keep]
        suites.append(tuple(current))
    return SuiteChain(tuple(suites))


def chain_kill_table(matrix: KillMatrix, chain: SuiteChain) -> np.ndarray:
    """``(k + 1, n_mutants)`` table: row i marks mutants killed by T_i."""
    return np.stack([killed_rows(matrix.cells, matrix.test_columns(s)) for s in chain.suites])


def sign_sequence(matrix: KillMatrix, chain: SuiteChain) -> list[Sign]:
    """GT/EQ sign between consecutive suites of the chain."""
    scores = chain_kill_table(matrix, chain).sum(axis=1)
    # nested suites can only lose kills, so LT never occurs
    return [Sign.GT if a > b else Sign.EQ for a, b in zip(scores, scores[1:])]


def thin_even_index(suite: Sequence[str]) -> tuple[str, ...]:
    """Delete the even (0-based) positions of an ordered suite.

    ``[t1, t2, t3, t4] -> (t2, t4)``; used to simulate an insufficient suite.
    """
    kept = tuple(suite)[1::2]
    if not kept:
        raise DomainError("thinning a single-test suite leaves it empty")
    return kept


# -- CSV --------------------------------------------------------------------


def _parse_bit(text: str, where: str) -> bool:
    text = text.strip()
    if text == "1":
        return True
    if text == "0":
        return False
    raise InputError(f"{where}: expected 0 or 1, got {text!r}")


def read_matrix(path, kind: type[RelationMatrix] = KillMatrix) -> RelationMatrix:
    """Read the canonical ``mutant_id,<test>...`` CSV."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "mutant_id":
        raise InputError(f"{path}:1:1: header must start with 'mutant_id' and name >= 1 test")
    tests = header[1:]
    ids, cells = [], []
    for r, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InputError(f"{path}:{r}: expected {len(header)} fields, got {len(row)}")
        ids.append(row[0].strip())
        cells.append([_parse_bit(c, f"{path}:{r}:{col}") for col, c in enumerate(row[1:], start=2)])
    if not ids:
        raise InputError(f"{path}: no mutant rows")
    try:
        return kind(tuple(ids), tuple(tests), np.array(cells, dtype=bool))
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_matrix(matrix: RelationMatrix, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mutant_id", *matrix.test_ids])
        for m, row in zip(matrix.mutant_ids, matrix.cells):
            w.writerow([m, *row.astype(np.uint8).tolist()])


def read_operators(path, mutant_ids: Sequence[str] | None = None) -> dict[str, str]:
    """Read a ``mutant_id,operator`` CSV into a dict.

    With ``mutant_ids`` given, every listed mutant must have exactly one label.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["mutant_id", "operator"]:
        raise InputError(f"{path}:1: header must be 'mutant_id,operator'")
    ops: dict[str, str] = {}
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise InputError(f"{path}:{r}: expected 2 fields, got {len(row)}")
        m, op = row[0].strip(), row[1].strip()
        if m in ops:
            raise InputError(f"{path}:{r}:1: duplicate mutant id {m!r}")
        if not op:
            raise InputError(f"{path}:{r}:2: empty operator label")
        ops[m] = op
    if mutant_ids is not None:
        missing = [m for m in mutant_ids if m not in ops]
        if missing:
            raise InputError(f"{path}: no operator for mutant {missing[0]!r}")
    return ops


def write_operators(operators: Mapping[str, str], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mutant_id", "operator"])
        for m, op in operators.items():
            w.writerow([m, op])
