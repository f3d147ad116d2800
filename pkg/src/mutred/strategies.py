"""Mutant reduction strategies.

Every strategy works on the covered-mutant universe and, where it needs more
than the ids, on the coverage matrix and operator labels.  The kill matrix is
never consulted here; it is reserved for evaluation.

Strategies are described by small frozen dataclasses with a textual form used
on the command line::

    rms:n=10
    cos:deny=RETURN_VALS|VOID_METHOD_CALL,n=10
    sms
    cms:n=10,init=sms
    cms:n=30,k=12            # cluster into 12, draw round-robin until 30
    drop:largest             # pipeline step: remove the biggest operator
    drop:op=MATH
    pipe:[drop:largest;rms:n=4]
    fixed:m1|m2

A count may be the literal ``sms``, meaning "as many as SMS selects"; it is
also the default when ``n`` is omitted (``rms`` is ``rms:n=sms``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import InfeasibleError, InputError
from .matrix import CoverageMatrix

log = logging.getLogger(__name__)

DEFAULT_DENY = frozenset({"RETURN_VALS", "VOID_METHOD_CALL"})
SMS_COUNT = "sms"

Count = Union[int, str]


# -- specs ------------------------------------------------------------------


def _check_count(n, what: str, optional: bool = False):
    if n is None and optional:
        return
    if n == SMS_COUNT:
        return
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise InputError(f"{what}: count must be a positive integer or 'sms', got {n!r}")


@dataclass(frozen=True)
class RMS:
    n: Count = SMS_COUNT

    def __post_init__(self):
        _check_count(self.n, "rms")


@dataclass(frozen=True)
class COS:
    n: Count | None = None
    deny: frozenset = DEFAULT_DENY

    def __post_init__(self):
        _check_count(self.n, "cos", optional=True)
        object.__setattr__(self, "deny", frozenset(self.deny))


@dataclass(frozen=True)
class SMS:
    pass


@dataclass(frozen=True)
class CMS:
    n: Count = SMS_COUNT
    init: str = "plusplus"
    k: Count | None = None

    def __post_init__(self):
        _check_count(self.n, "cms")
        _check_count(self.k, "cms k", optional=True)
        if self.init not in ("plusplus", "sms"):
            raise InputError(f"cms: init must be 'plusplus' or 'sms', got {self.init!r}")


@dataclass(frozen=True)
class Drop:
    """Remove one operator's mutants; ``label=None`` means the largest group."""

    label: str | None = None


@dataclass(frozen=True)
class Fixed:
    mutant_ids: tuple[str, ...]

    def __post_init__(self):
        if not self.mutant_ids:
            raise InputError("fixed: selection must be non-empty")
        object.__setattr__(self, "mutant_ids", tuple(self.mutant_ids))


@dataclass(frozen=True)
class Pipeline:
    steps: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.steps:
            raise InputError("pipe: needs at least one step")
        object.__setattr__(self, "steps", tuple(self.steps))


StrategySpec = Union[RMS, COS, SMS, CMS, Drop, Fixed, Pipeline]


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise InputError(f"unbalanced ']' in {text!r}")
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth:
        raise InputError(f"unbalanced '[' in {text!r}")
    parts.append("".join(cur))
    return parts


def _parse_count(value: str, where: str) -> Count:
    if value == SMS_COUNT:
        return SMS_COUNT
    try:
        return int(value)
    except ValueError:
        raise InputError(f"{where}: bad count {value!r}") from None


def parse_spec(text: str, _in_pipe: bool = False) -> StrategySpec:
    """Parse the textual strategy form (see module docstring).

    Inside ``pipe:[...]`` a bare ``cos`` is a pure filter step; on its own it
    draws ``n`` (default ``sms``) mutants from what the filter leaves.
    """
    text = text.strip()
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    if name == "pipe":
        rest = rest.strip()
        if not (rest.startswith("[") and rest.endswith("]")):
            raise InputError(f"pipe: steps must be wrapped in [...], got {rest!r}")
        return Pipeline(tuple(parse_spec(s, True) for s in _split_top(rest[1:-1], ";") if s.strip()))
    if name == "fixed":
        return Fixed(tuple(m.strip() for m in rest.split("|") if m.strip()))
    if name == "sms":
        if rest.strip():
            raise InputError("sms takes no arguments")
        return SMS()
    if name == "drop":
        rest = rest.strip()
        if rest in ("", "largest"):
            return Drop()
        key, _, value = rest.partition("=")
        if key.strip() != "op" or not value.strip():
            raise InputError(f"drop: expected 'largest' or 'op=LABEL', got {rest!r}")
        return Drop(value.strip())

    args: dict[str, str] = {}
    for part in _split_top(rest, ","):
        if not part.strip():
            continue
        key, eq, value = part.partition("=")
        if not eq:
            raise InputError(f"{name}: expected key=value, got {part!r}")
        args[key.strip()] = value.strip()

    def take(key, default=None):
        return args.pop(key, default)

    if name == "rms":
        spec = RMS(_parse_count(take("n", SMS_COUNT), name))
    elif name == "cos":
        n = take("n", None if _in_pipe else SMS_COUNT)
        deny = take("deny")
        spec = COS(
            None if n is None else _parse_count(n, name),
            DEFAULT_DENY if deny is None else frozenset(d for d in deny.split("|") if d),
        )
    elif name == "cms":
        k = take("k")
        spec = CMS(
            _parse_count(take("n", SMS_COUNT), name),
            take("init", "plusplus"),
            None if k is None else _parse_count(k, name),
        )
    else:
        raise InputError(f"unknown strategy {name!r}")
    if args:
        raise InputError(f"{name}: unknown argument(s) {sorted(args)}")
    return spec


def format_spec(spec: StrategySpec) -> str:
    """Canonical text; ``parse_spec(format_spec(s)) == s``."""
    if isinstance(spec, RMS):
        return f"rms:n={spec.n}"
    if isinstance(spec, COS):
        text = "cos:deny=" + "|".join(sorted(spec.deny))
        return text if spec.n is None else f"{text},n={spec.n}"
    if isinstance(spec, SMS):
        return "sms"
    if isinstance(spec, CMS):
        text = f"cms:n={spec.n},init={spec.init}"
        return text if spec.k is None else f"{text},k={spec.k}"
    if isinstance(spec, Drop):
        return "drop:largest" if spec.label is None else f"drop:op={spec.label}"
    if isinstance(spec, Fixed):
        return "fixed:" + "|".join(spec.mutant_ids)
    if isinstance(spec, Pipeline):
        return "pipe:[" + ";".join(format_spec(s) for s in spec.steps) + "]"
    raise TypeError(f"not a strategy spec: {spec!r}")


def spec_count(spec: StrategySpec) -> Count | None:
    """The number of mutants the spec asks for, if it fixes one."""
    if isinstance(spec, (RMS, CMS)):
        return spec.n
    if isinstance(spec, COS):
        return spec.n
    if isinstance(spec, Pipeline):
        for step in reversed(spec.steps):
            n = spec_count(step)
            if n is not None:
                return n
    return None


def with_count(spec: StrategySpec, n: Count) -> StrategySpec:
    """Same strategy asking for ``n`` mutants.  SMS and fixed specs are returned as-is."""
    if isinstance(spec, (RMS, CMS, COS)):
        return replace(spec, n=n)
    if isinstance(spec, Pipeline):
        steps = list(spec.steps)
        for i in range(len(steps) - 1, -1, -1):
            if spec_count(steps[i]) is not None:
                steps[i] = with_count(steps[i], n)
                return Pipeline(tuple(steps))
        return Pipeline((*steps, RMS(n)))
    return spec


# -- selection --------------------------------------------------------------


@dataclass(frozen=True)
class Selection:
    mutant_ids: tuple[str, ...]
    spec: str
    seed: int | None
    universe_size: int

    def __post_init__(self):
        if not self.mutant_ids:
            raise InfeasibleError(f"{self.spec}: empty selection")

    def __len__(self):
        return len(self.mutant_ids)


@dataclass
class SelectionContext:
    """What strategies may look at: coverage, the universe and operator labels."""

    cover: CoverageMatrix
    universe: tuple[str, ...]
    operators: Mapping[str, str] | None = None

    def __post_init__(self):
        self.universe = tuple(self.universe)
        if not self.universe:
            raise InputError("empty mutant universe")
        self.cover.mutant_rows(self.universe)  # id check

    @cached_property
    def sms(self) -> tuple[str, ...]:
        return _sms_ids(self.cover, self.universe)

    def resolve(self, n: Count | None) -> int | None:
        return len(self.sms) if n == SMS_COUNT else n

    def labels(self) -> Mapping[str, str]:
        if self.operators is None:
            raise InputError("operator-based strategies need an operator map")
        missing = [m for m in self.universe if m not in self.operators]
        if missing:
            raise InputError(f"no operator label for mutant {missing[0]!r}")
        return self.operators


def _in_order(universe: Sequence[str], chosen: Sequence[int]) -> tuple[str, ...]:
    return tuple(universe[i] for i in sorted(chosen))


def _rms_ids(pool: Sequence[str], n: int, rng: np.random.Generator) -> tuple[str, ...]:
    if not 1 <= n <= len(pool):
        raise InputError(f"rms: n={n} outside 1..{len(pool)}")
    return _in_order(pool, rng.choice(len(pool), size=n, replace=False))


def select_rms(universe: Sequence[str], n: int, rng: np.random.Generator, seed=None) -> Selection:
    """Uniformly random ``n``-subset of the universe."""
    universe = tuple(universe)
    return Selection(_rms_ids(universe, n, rng), format_spec(RMS(n)), seed, len(universe))


def _cos_pool(pool: Sequence[str], operators: Mapping[str, str], deny) -> tuple[str, ...]:
    return tuple(m for m in pool if operators[m] not in deny)


def select_cos(
    universe: Sequence[str],
    operators: Mapping[str, str],
    deny=DEFAULT_DENY,
    n: int = 1,
    rng: np.random.Generator | None = None,
    seed=None,
) -> Selection:
    """Drop mutants of denied operators, then draw ``n`` uniformly from the rest."""
    universe = tuple(universe)
    deny = frozenset(deny)
    unknown = deny - set(operators.values())
    if unknown:
        log.debug("cos: deny labels %s do not occur in the operator map", sorted(unknown))
    pool = _cos_pool(universe, operators, deny)
    if len(pool) < n:
        raise InfeasibleError(f"cos: only {len(pool)} mutants remain after denying {sorted(deny)}, need {n}")
    rng = np.random.default_rng() if rng is None else rng
    return Selection(_rms_ids(pool, n, rng), format_spec(COS(n, deny)), seed, len(universe))


def coverage_subsumes(a: str, b: str, cover: CoverageMatrix) -> bool:
    """True when ``a`` is covered and every test covering ``a`` covers ``b``."""
    ra, rb = cover.cells[cover.mutant_rows([a, b])]
    return bool(ra.any() and not (ra & ~rb).any())


def _sms_ids(cover: CoverageMatrix, universe: Sequence[str], block: int = 512) -> tuple[str, ...]:
    rows = cover.mutant_rows(universe)
    cells = cover.cells[rows]
    empty = ~cells.any(axis=1)
    if empty.any():
        raise InputError(f"sms: mutant {universe[int(np.flatnonzero(empty)[0])]!r} is not covered")
    # one representative (earliest in universe order) per distinct cover-set
    _, first = np.unique(np.packbits(cells, axis=1), axis=0, return_index=True)
    first = np.sort(first)
    reps = cells[first].astype(np.int32)
    sizes = reps.sum(axis=1)
    keep = np.ones(len(first), dtype=bool)
    for lo in range(0, len(first), block):
        # overlap[s, r] == |s| means s is a subset of r
        overlap = reps @ reps[lo : lo + block].T
        contains = overlap == sizes[:, None]
        for j in range(contains.shape[1]):
            contains[lo + j, j] = False  # a representative never removes itself
        keep[lo : lo + block] = ~contains.any(axis=0)
    return tuple(universe[i] for i in first[keep])


def select_sms(cover: CoverageMatrix, universe: Sequence[str], seed=None) -> Selection:
    """Non-coverage-subsumed mutants, one per group of identical cover-sets."""
    universe = tuple(universe)
    return Selection(_sms_ids(cover, universe), "sms", seed, len(universe))


# -- k-means ----------------------------------------------------------------


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return (
        (points**2).sum(axis=1)[:, None]
        - 2.0 * points @ centers.T
        + (centers**2).sum(axis=1)[None, :]
    ).clip(min=0.0)


def plusplus_centers(points: np.ndarray, k: int, rng: np.random.Generator, start=None) -> np.ndarray:
    """k-means++ seeding, optionally extending a given set of starting centers."""
    centers = [] if start is None else list(start)
    if not centers:
        centers.append(points[rng.integers(len(points))])
    # distance to the nearest chosen center, updated one center at a time
    d2 = _sq_dists(points, np.asarray(centers, dtype=float)).min(axis=1)
    while len(centers) < k:
        cum = np.cumsum(d2)
        if cum[-1] > 0:
            # draw proportional to d2 by inverting the cumulative sum
            idx = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), len(points) - 1)
        else:
            idx = int(rng.integers(len(points)))
        centers.append(points[idx])
        np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1), out=d2)
    return np.asarray(centers, dtype=float)


def kmeans(
    points: np.ndarray,
    k: int,
    rng: np.random.Generator,
    init: np.ndarray | None = None,
    max_iter: int = 100,
) -> np.ndarray:
    """Lloyd's algorithm with squared Euclidean distance; returns labels.

    Runs until assignments stop changing or ``max_iter`` is hit.  A cluster
    left empty takes the point farthest from its current center, drawn from
    clusters that still have more than one member, so every label in
    ``range(k)`` is used.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    if not 1 <= k <= n:
        raise InputError(f"kmeans: k={k} outside 1..{n}")
    centers = plusplus_centers(points, k, rng) if init is None else np.array(init, dtype=float)
    if centers.shape != (k, points.shape[1]):
        raise InputError(f"kmeans: init has shape {centers.shape}, expected {(k, points.shape[1])}")
    labels = None
    for _ in range(max_iter):
        d2 = _sq_dists(points, centers)
        new = d2.argmin(axis=1)
        own = d2[np.arange(n), new]
        counts = np.bincount(new, minlength=k)
        for c in np.flatnonzero(counts == 0):
            movable = counts[new] > 1
            far = int(np.argmax(np.where(movable, own, -1.0)))
            counts[new[far]] -= 1
            new[far] = c
            counts[c] = 1
            own[far] = 0.0
            centers[c] = points[far]
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = np.zeros_like(centers)
        np.add.at(centers, labels, points)
        centers /= counts[:, None]
    return labels


def _cms_ids(ctx: SelectionContext, pool, n, init, k, rng) -> tuple[str, ...]:
    pool = tuple(pool)
    if not 1 <= n <= len(pool):
        raise InputError(f"cms: n={n} outside 1..{len(pool)}")
    k = n if k is None else min(k, len(pool))
    points = ctx.cover.cells[ctx.cover.mutant_rows(pool)].astype(float)
    start = None
    if init == "sms":
        in_pool = set(pool)
        seeds = [m for m in ctx.sms if m in in_pool][:k]
        start = ctx.cover.cells[ctx.cover.mutant_rows(seeds)].astype(float) if seeds else None
    centers = plusplus_centers(points, k, rng, start=start)
    labels = kmeans(points, k, rng, init=centers)
    order = np.argsort(labels, kind="stable")
    members = [list(g) for g in np.split(order, np.cumsum(np.bincount(labels, minlength=k))[:-1])]
    chosen: list[int] = []
    # one member per cluster per round, clusters visited in random order
    while len(chosen) < n:
        for c in rng.permutation(k):
            if members[c] and len(chosen) < n:
                chosen.append(members[c].pop(int(rng.integers(len(members[c])))))
    return _in_order(pool, chosen)


def select_cms(
    cover: CoverageMatrix,
    universe: Sequence[str],
    n: int,
    init: str = "plusplus",
    rng: np.random.Generator | None = None,
    k: int | None = None,
    seed=None,
) -> Selection:
    """Cluster coverage rows with k-means and pick one random member per cluster.

    ``k=None`` clusters into ``n`` groups.  With an explicit ``k`` the clusters
    are visited round-robin until ``n`` mutants are drawn.  ``init="sms"``
    seeds the centers with the SMS representatives.
    """
    ctx = SelectionContext(cover, universe)
    rng = np.random.default_rng() if rng is None else rng
    ids = _cms_ids(ctx, ctx.universe, n, init, k, rng)
    return Selection(ids, format_spec(CMS(n, init, k)), seed, len(ctx.universe))


# -- dispatch & pipelines ---------------------------------------------------


def _drop(pool, operators: Mapping[str, str], label: str | None) -> tuple[str, ...]:
    if label is None:
        sizes: dict[str, int] = {}
        for m in pool:
            sizes[operators[m]] = sizes.get(operators[m], 0) + 1
        label = min(sizes, key=lambda op: (-sizes[op], op))
    return tuple(m for m in pool if operators[m] != label)


def _run(spec: StrategySpec, ctx: SelectionContext, pool, rng, target: int | None) -> tuple[str, ...]:
    """Apply ``spec`` to ``pool`` and return the surviving ids in universe order."""
    if isinstance(spec, RMS):
        return _rms_ids(pool, ctx.resolve(spec.n), rng)
    if isinstance(spec, COS):
        remaining = _cos_pool(pool, ctx.labels(), spec.deny)
        n = ctx.resolve(spec.n)
        if n is None:
            return remaining
        if len(remaining) < n:
            raise InfeasibleError(
                f"cos: only {len(remaining)} mutants remain after denying {sorted(spec.deny)}, need {n}"
            )
        return _rms_ids(remaining, n, rng)
    if isinstance(spec, SMS):
        return _sms_ids(ctx.cover, pool)
    if isinstance(spec, CMS):
        return _cms_ids(ctx, pool, ctx.resolve(spec.n), spec.init, ctx.resolve(spec.k), rng)
    if isinstance(spec, Drop):
        return _drop(pool, ctx.labels(), spec.label)
    if isinstance(spec, Fixed):
        ctx.cover.mutant_rows(spec.mutant_ids)
        outside = set(spec.mutant_ids) - set(pool)
        if outside:
            raise InputError(f"fixed: {sorted(outside)[0]!r} is not in the mutant universe")
        keep = set(spec.mutant_ids)
        return tuple(m for m in pool if m in keep)
    if isinstance(spec, Pipeline):
        return _pipeline_ids(spec.steps, ctx, pool, target, rng)
    raise TypeError(f"not a strategy spec: {spec!r}")


def _pipeline_ids(steps, ctx, pool, n, rng) -> tuple[str, ...]:
    if n is None:
        n = ctx.resolve(spec_count(Pipeline(tuple(steps))))
    if n is None:
        raise InputError("pipe: no count step and no target count given")
    if len(pool) < n:
        raise InfeasibleError(f"pipe: universe holds {len(pool)} mutants, need {n}")
    for step in steps:
        try:
            out = _run(step, ctx, pool, rng, n)
        except InfeasibleError as exc:
            log.debug("pipe: skipping %s (%s)", format_spec(step), exc)
            continue
        if len(out) < n:
            log.debug("pipe: skipping %s (leaves %d < %d)", format_spec(step), len(out), n)
            continue
        pool = out
    if len(pool) > n:
        pool = _rms_ids(pool, n, rng)
    return pool


def apply_pipeline(steps, ctx: SelectionContext, n: int | None, rng: np.random.Generator, seed=None) -> Selection:
    """Apply pipeline steps in order, skipping any that would leave fewer than ``n``.

    Without a terminal count step the surviving pool is padded down to ``n``
    by uniform sampling.
    """
    steps = tuple(steps)
    ids = _pipeline_ids(steps, ctx, ctx.universe, n, rng)
    return Selection(ids, format_spec(Pipeline(steps)), seed, len(ctx.universe))


def select(spec: StrategySpec, ctx: SelectionContext, rng: np.random.Generator, seed=None) -> Selection:
    """Run any strategy spec against the context's universe."""
    target = ctx.resolve(spec_count(spec))
    ids = _run(spec, ctx, ctx.universe, rng, target)
    return Selection(ids, format_spec(spec), seed, len(ctx.universe))

