"""Reduction evaluation indicators.

``kill`` is always the evaluation matrix: its rows are the full mutant set
``M`` and its columns the tests suites are drawn from.  A *selection* is any
iterable of mutant ids, a :class:`~mutred.strategies.Selection`, or (for the
repeated indicators) a callable ``rng -> ids`` that draws a fresh selection
per repetition.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .errors import DomainError, InputError, ResourceError
from .matrix import KillMatrix, SuiteChain, chain_kill_table, half_sample_chain, killed_rows
from .strategies import Selection

INDICATORS = ("MS", "VMS", "AVG_VMS", "ES", "RR", "OP", "EROP", "NOP", "ORACLE_OP")
HIGHER_IS_BETTER = {"MS", "ES", "RR", "OP", "EROP", "NOP", "ORACLE_OP"}
LOWER_IS_BETTER = {"VMS", "AVG_VMS"}

SelectionLike = Union[Selection, Iterable[str]]
Drawer = Callable[[np.random.Generator], SelectionLike]


@dataclass(frozen=True)
class IndicatorReport:
    strategy: str
    rep: int
    indicator: str
    value: float
    seed: int

    def __post_init__(self):
        if self.indicator not in INDICATORS:
            raise InputError(f"unknown indicator {self.indicator!r}")


def _ids(selection: SelectionLike) -> tuple[str, ...]:
    ids = selection.mutant_ids if isinstance(selection, Selection) else tuple(selection)
    if not ids:
        raise InputError("empty selection")
    return ids


def _rows(kill: KillMatrix, selection: SelectionLike) -> np.ndarray:
    return kill.mutant_rows(_ids(selection))


def _draw(selection, rng) -> SelectionLike:
    return selection(rng) if callable(selection) else selection


def rr(universe_size: int, selection: SelectionLike | int) -> float:
    """Reduction ratio ``(|M| - |M_s|) / |M|``."""
    size = selection if isinstance(selection, int) else len(_ids(selection))
    if not 1 <= size <= universe_size:
        raise InputError(f"selection of {size} from a universe of {universe_size}")
    return (universe_size - size) / universe_size


def _score(cells: np.ndarray, rows: np.ndarray | None, cols: np.ndarray) -> float:
    hit = killed_rows(cells, cols)
    return float(hit.mean() if rows is None else hit[rows].mean())


def vms(kill: KillMatrix, selection: SelectionLike, suite: Iterable[str]) -> float:
    """``|MS(M, T) - MS(M_s, T)|`` on a single suite."""
    cols = kill.test_columns(suite)
    return abs(_score(kill.cells, None, cols) - _score(kill.cells, _rows(kill, selection), cols))


def avg_vms(kill: KillMatrix, selection: SelectionLike, chains: Sequence[SuiteChain]) -> float:
    """Mean VMS over every suite (T_0 included) of every chain."""
    if not chains:
        raise InputError("avg_vms needs at least one chain")
    rows = _rows(kill, selection)
    values = []
    for chain in chains:
        table = chain_kill_table(kill, chain)
        values.extend(np.abs(table.mean(axis=1) - table[:, rows].mean(axis=1)))
    return float(np.mean(values))


def _effectiveness(cells: np.ndarray, rows: np.ndarray, cols: np.ndarray, n_killed: int) -> float:
    # tests of the suite killing any selected mutant, then what they kill overall
    ts = cols[cells[np.ix_(rows, cols)].any(axis=0)]
    return killed_rows(cells, ts).sum() / n_killed


def strategy_effectiveness(
    kill: KillMatrix,
    selection: SelectionLike,
    suite: Iterable[str],
    baseline_reps: int = 100,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Absolute and relative strategy effectiveness.

    The relative value subtracts the mean absolute effectiveness of
    ``baseline_reps`` uniform random selections of the same size.
    """
    cols = kill.test_columns(suite)
    n_killed = int(killed_rows(kill.cells, cols).sum())
    if n_killed == 0:
        raise DomainError("the suite kills no mutant; strategy effectiveness is undefined")
    if baseline_reps < 1:
        raise InputError("baseline_reps must be >= 1")
    rows = _rows(kill, selection)
    absolute = _effectiveness(kill.cells, rows, cols, n_killed)
    rng = np.random.default_rng() if rng is None else rng
    m = kill.shape[0]
    baseline = [
        _effectiveness(kill.cells, rng.choice(m, size=len(rows), replace=False), cols, n_killed)
        for _ in range(baseline_reps)
    ]
    return float(absolute), float(absolute - np.mean(baseline))


def _changed_signs(table: np.ndarray, rows: np.ndarray) -> int:
    """|X| for one chain given its kill table and the selected rows."""
    full = table.sum(axis=1)
    reduced = table[:, rows].sum(axis=1)
    full_gt = full[:-1] > full[1:]
    red_gt = reduced[:-1] > reduced[1:]
    if np.any(red_gt & ~full_gt):
        # an equal pair under M must stay equal under any subset of M
        raise AssertionError("reduced GT where the full mutant set has EQ")
    return int(np.sum(full_gt & ~red_gt))


def op_single_chain(kill: KillMatrix, selection: SelectionLike, chain: SuiteChain) -> float:
    """``1 - |X| / k`` for one chain."""
    if chain.k < 1:
        raise DomainError("OP is undefined for k = 0")
    return 1.0 - _changed_signs(chain_kill_table(kill, chain), _rows(kill, selection)) / chain.k


def _suite(kill: KillMatrix, suite: Iterable[str] | None) -> tuple[str, ...]:
    suite = kill.test_ids if suite is None else kill.ordered_tests(suite)
    if len(suite) < 2:
        raise DomainError("order preservation needs a suite of at least 2 tests")
    return suite


def op_mean(
    kill: KillMatrix,
    selection: SelectionLike | Drawer,
    suite: Iterable[str] | None = None,
    reps: int = 100,
    rng: np.random.Generator | None = None,
) -> tuple[float, list[float]]:
    """Average OP over ``reps`` independently drawn half-sample chains."""
    if reps < 1:
        raise InputError("reps must be >= 1")
    suite = _suite(kill, suite)
    rng = np.random.default_rng() if rng is None else rng
    per_rep = []
    for _ in range(reps):
        chain = half_sample_chain(suite, rng)
        rows = _rows(kill, _draw(selection, rng))
        per_rep.append(1.0 - _changed_signs(chain_kill_table(kill, chain), rows) / chain.k)
    return float(np.mean(per_rep)), per_rep


def erop_rep(kill: KillMatrix, table: np.ndarray, rows: np.ndarray, rng: np.random.Generator) -> float:
    """One paired EROP term: RR times (OP of ``rows`` minus OP of a same-size random draw)."""
    m = kill.shape[0]
    k = table.shape[0] - 1
    baseline = rng.choice(m, size=len(rows), replace=False)
    diff = (_changed_signs(table, baseline) - _changed_signs(table, rows)) / k
    return (m - len(rows)) / m * diff


def erop(
    kill: KillMatrix,
    selection: SelectionLike | Drawer,
    suite: Iterable[str] | None = None,
    reps: int = 100,
    rng: np.random.Generator | None = None,
) -> float:
    """Effort-aware relative order preservation.

    Each repetition draws one chain and scores the selection and a fresh
    uniform random selection of equal size on that same chain.
    """
    if reps < 1:
        raise InputError("reps must be >= 1")
    suite = _suite(kill, suite)
    rng = np.random.default_rng() if rng is None else rng
    terms = []
    for _ in range(reps):
        chain = half_sample_chain(suite, rng)
        rows = _rows(kill, _draw(selection, rng))
        terms.append(erop_rep(kill, chain_kill_table(kill, chain), rows, rng))
    return float(np.mean(terms))


def random_nonempty_subsets(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``(count, n)`` boolean rows, each uniform over the non-empty subsets."""
    out = rng.random((count, n)) < 0.5
    empty = ~out.any(axis=1)
    while empty.any():
        out[empty] = rng.random((int(empty.sum()), n)) < 0.5
        empty = ~out.any(axis=1)
    return out


def _kill_counts(cells: np.ndarray, masks: np.ndarray, block: int = 4096) -> np.ndarray:
    """Killed-mutant count for each boolean suite mask (rows of ``masks``)."""
    c = cells.astype(np.int32)
    out = np.empty(len(masks), dtype=np.int64)
    for lo in range(0, len(masks), block):
        out[lo : lo + block] = ((c @ masks[lo : lo + block].T.astype(np.int32)) > 0).sum(axis=0)
    return out


def nop(
    kill: KillMatrix,
    selection: SelectionLike,
    suite: Iterable[str] | None = None,
    rng: np.random.Generator | None = None,
    pairs: int | None = None,
) -> float:
    """Order preservation over random suite pairs without the subset constraint.

    Draws ``pairs`` ordered pairs of distinct non-empty subsets of ``suite``
    (``100 * floor(log2 |suite|)`` by default) and returns the fraction whose
    GT/EQ/LT relation is the same under the selection as under ``M``.
    """
    suite = _suite(kill, suite)
    rng = np.random.default_rng() if rng is None else rng
    n = len(suite)
    if pairs is None:
        pairs = 100 * int(np.log2(n))
    if pairs < 1:
        raise InputError("pairs must be >= 1")
    cells = kill.cells[:, kill.test_columns(suite)]
    a = random_nonempty_subsets(n, pairs, rng)
    b = random_nonempty_subsets(n, pairs, rng)
    same = (a == b).all(axis=1)
    while same.any():
        b[same] = random_nonempty_subsets(n, int(same.sum()), rng)
        same = (a == b).all(axis=1)
    rows = _rows(kill, selection)
    full = np.sign(_kill_counts(cells, a) - _kill_counts(cells, b))
    red = np.sign(_kill_counts(cells[rows], a) - _kill_counts(cells[rows], b))
    return float(np.mean(full == red))


def p_count(n: int) -> int:
    """Number of (suite, suite minus one test) pairs over all non-empty subsets."""
    if n < 1:
        raise InputError("p_count needs n >= 1")
    return n * (2 ** (n - 1) - 1)


def p_count_sum(n: int) -> int:
    """The same count as an explicit sum over subset sizes."""
    return sum(k * comb(n, k) for k in range(2, n + 1))


def _subset_counts(cells: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Killed count for every integer-encoded subset in ``masks``."""
    n = cells.shape[1]
    weights = 1 << np.arange(n, dtype=np.int64)
    bits, mult = np.unique(cells.astype(np.int64) @ weights, return_counts=True)
    counts = np.zeros(len(masks), dtype=np.int64)
    for b, c in zip(bits, mult):
        if b:
            counts += c * ((masks & b) != 0)
    return counts


def full_oracle_op(
    kill: KillMatrix,
    selection: SelectionLike,
    suite: Iterable[str] | None = None,
    max_n: int = 20,
) -> tuple[float, int, int]:
    """Exhaustive order preservation over every subset/remove-one-test pair.

    Returns ``(preserved, changed, total)`` with ``total == p_count(n)``.
    """
    suite = _suite(kill, suite)
    n = len(suite)
    if n > max_n:
        raise ResourceError(f"{n} tests exceed the exhaustive limit of {max_n}; use op_mean instead")
    cells = kill.cells[:, kill.test_columns(suite)]
    rows = _rows(kill, selection)
    masks = np.arange(1 << n, dtype=np.int64)
    full = _subset_counts(cells, masks)
    red = _subset_counts(cells[rows], masks)
    changed = total = 0
    for j in range(n):
        outer = masks[(masks >> j) & 1 == 1]
        inner = outer ^ (1 << j)
        outer, inner = outer[inner != 0], inner[inner != 0]
        full_gt = full[outer] > full[inner]
        red_gt = red[outer] > red[inner]
        if np.any(red_gt & ~full_gt):
            raise AssertionError("reduced GT where the full mutant set has EQ")
        changed += int(np.sum(full_gt & ~red_gt))
        total += len(outer)
    if total != p_count(n):
        raise AssertionError(f"enumerated {total} pairs, expected {p_count(n)}")
    return 1.0 - changed / total, changed, total
