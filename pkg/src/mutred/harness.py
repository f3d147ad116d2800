"""Experiment orchestration behind the CLI subcommands.

Randomness is split into independent streams derived from the global seed
with :class:`numpy.random.SeedSequence` spawn keys, so every (strategy, rep)
cell is reproducible on its own and results do not depend on the order or
the process in which cells run.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import indicators as ind
from .errors import DomainError, InfeasibleError, InputError
from .matrix import (
    CoverageMatrix,
    KillMatrix,
    SuiteChain,
    chain_kill_table,
    check_pair,
    filter_uncovered,
    half_sample_chain,
    read_matrix,
    read_operators,
    restrict,
    thin_even_index,
    write_matrix,
    write_operators,
)
from .ranking import Direction, scott_knott_esd
from .strategies import (
    CMS,
    SMS,
    SMS_COUNT,
    Fixed,
    SelectionContext,
    format_spec,
    parse_spec,
    select,
    with_count,
)
from .synth import SynthSpec, generate

log = logging.getLogger(__name__)

# spawn-key streams
_SELECT, _CHAIN, _BASELINE, _SUITES = range(4)

DEFAULT_STRATEGIES = ("rms", "cos", "sms", "cms:init=sms", "pipe:[drop:largest;rms]")
DEFAULT_INDICATORS = ("RR", "VMS", "AVG_VMS", "OP", "EROP", "NOP")
SWEEP_STRATEGIES = ("rms", "cos", "cms", "pipe:[drop:largest;rms]", "sms")


def default_ratios() -> list[float]:
    """0.95, 0.90, ..., 0.05, 0.0"""
    return [round(0.95 - 0.05 * i, 2) for i in range(20)]


def sub_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(sub_seed(seed, *key))


@dataclass
class ExperimentConfig:
    kill_path: str
    coverage_path: str | None = None
    operators_path: str | None = None
    strategies: list[str] = field(default_factory=lambda: list(DEFAULT_STRATEGIES))
    reps: int = 100
    seed: int = 0
    suite_mode: str = "full"
    ratios: list[float] = field(default_factory=default_ratios)
    indicators: list[str] = field(default_factory=lambda: list(DEFAULT_INDICATORS))
    output_dir: str = "results"
    unpaired: bool = False
    chain: str | None = None
    workers: int = 1
    baseline_reps: int = 100
    nop_pairs: int | None = None
    oracle_max_n: int = 16

    def __post_init__(self):
        if self.reps < 1:
            raise InputError("reps must be >= 1")
        if not self.strategies:
            raise InputError("at least one strategy is required")
        labels = [s.strip() for s in self.strategies]
        if len(set(labels)) != len(labels):
            raise InputError("strategy list contains duplicates")
        self.strategies = labels
        if not self.indicators:
            raise InputError("at least one indicator is required")
        unknown = [i for i in self.indicators if i not in ind.INDICATORS]
        if unknown:
            raise InputError(f"unknown indicator {unknown[0]!r}")
        bad = [r for r in self.ratios if not 0 <= r < 1]
        if bad:
            raise InputError(f"ratios must lie in [0, 1), got {bad[0]}")
        if self.workers < 1:
            raise InputError("workers must be >= 1")
        parse_suite_mode(self.suite_mode)

    @classmethod
    def from_json(cls, path, **overrides) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise InputError(f"{path}: unknown config field(s) {sorted(extra)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


def parse_suite_mode(text: str) -> tuple[str, int]:
    """``full``, ``even-thinned`` or ``random-half=N``."""
    if text in ("full", "even-thinned"):
        return text, 1
    name, _, count = text.partition("=")
    if name == "random-half":
        try:
            n = int(count)
        except ValueError:
            n = 0
        if n >= 1:
            return name, n
    raise InputError(f"bad suite mode {text!r}; use full, even-thinned or random-half=N")


@dataclass
class Inputs:
    kill: KillMatrix  # rows restricted to the covered universe
    ctx: SelectionContext
    n_mutants_total: int


def load_inputs(config: ExperimentConfig) -> Inputs:
    kill = read_matrix(config.kill_path, KillMatrix)
    if config.coverage_path:
        cover = read_matrix(config.coverage_path, CoverageMatrix)
        check_pair(kill, cover)
    else:
        log.warning("no coverage matrix given; using the kill matrix as coverage")
        cover = CoverageMatrix.from_kill(kill)
    operators = None
    if config.operators_path:
        operators = read_operators(config.operators_path, kill.mutant_ids)
    universe = filter_uncovered(kill, cover)
    if not universe:
        raise InputError("no mutant is covered by any test")
    if len(universe) < len(kill.mutant_ids):
        log.info("dropped %d uncovered mutants", len(kill.mutant_ids) - len(universe))
    return Inputs(restrict(kill, universe), SelectionContext(cover, universe, operators), len(kill.mutant_ids))


def build_suites(config: ExperimentConfig, kill: KillMatrix) -> list[tuple[str, ...]]:
    if config.chain:
        chain = SuiteChain.parse(config.chain)
        return [kill.ordered_tests(chain.suites[0])]
    mode, count = parse_suite_mode(config.suite_mode)
    if mode == "full":
        return [kill.test_ids]
    if mode == "even-thinned":
        return [thin_even_index(kill.test_ids)]
    rng = _rng(config.seed, _SUITES)
    n = len(kill.test_ids)
    if n < 2:
        raise DomainError("random-half suites need at least 2 tests")
    return [
        tuple(kill.test_ids[j] for j in np.sort(rng.choice(n, size=n // 2, replace=False)))
        for _ in range(count)
    ]


class _Chains:
    """Per-repetition chains and their kill tables, built lazily and cached."""

    def __init__(self, kill: KillMatrix, suites, seed: int, fixed: SuiteChain | None):
        self.kill, self.suites, self.seed, self.fixed = kill, suites, seed, fixed
        self._cache: dict[tuple, tuple[SuiteChain, np.ndarray]] = {}

    def get(self, rep: int, *key: int) -> tuple[SuiteChain, np.ndarray]:
        ck = (rep, *key)
        if ck not in self._cache:
            if self.fixed is not None:
                chain = self.fixed
            else:
                suite = self.suites[rep % len(self.suites)]
                chain = half_sample_chain(suite, _rng(self.seed, _CHAIN, *key, rep))
            self._cache[ck] = (chain, chain_kill_table(self.kill, chain))
        return self._cache[ck]


# -- evaluate ---------------------------------------------------------------


def _cell_values(inputs: Inputs, config: ExperimentConfig, rows, chain, table, rng) -> dict[str, float]:
    kill = inputs.kill
    m = kill.shape[0]
    suite = chain.suites[0]
    out: dict[str, float] = {}
    for name in config.indicators:
        if name == "MS":
            out[name] = float(table[0, rows].mean())
        elif name == "VMS":
            out[name] = abs(float(table[0].mean()) - float(table[0, rows].mean()))
        elif name == "AVG_VMS":
            out[name] = float(np.mean(np.abs(table.mean(axis=1) - table[:, rows].mean(axis=1))))
        elif name == "RR":
            out[name] = ind.rr(m, len(rows))
        elif name == "OP":
            out[name] = 1.0 - ind._changed_signs(table, rows) / chain.k
        elif name == "EROP":
            out[name] = ind.erop_rep(kill, table, rows, rng)
        elif name == "NOP":
            ids = [kill.mutant_ids[i] for i in rows]
            out[name] = ind.nop(kill, ids, suite, rng, config.nop_pairs)
        elif name == "ES":
            ids = [kill.mutant_ids[i] for i in rows]
            out[name] = ind.strategy_effectiveness(kill, ids, suite, config.baseline_reps, rng)[1]
        elif name == "ORACLE_OP":
            ids = [kill.mutant_ids[i] for i in rows]
            out[name] = ind.full_oracle_op(kill, ids, suite, config.oracle_max_n)[0]
    return out


def _run_strategy(args) -> dict:
    inputs, config, si, text, reps = args
    spec = parse_spec(text)
    suites = build_suites(config, inputs.kill)
    fixed = SuiteChain.parse(config.chain) if config.chain else None
    chains = _Chains(inputs.kill, suites, config.seed, fixed)
    rows_out, sizes = [], []
    for r in reps:
        seed = sub_seed(config.seed, _SELECT, si, r)
        try:
            selection = select(spec, inputs.ctx, np.random.default_rng(seed), seed)
        except InfeasibleError as exc:
            return {"index": si, "status": "skipped", "reason": str(exc), "rows": [], "sizes": []}
        chain, table = chains.get(r, si) if config.unpaired else chains.get(r)
        rows = inputs.kill.mutant_rows(selection.mutant_ids)
        values = _cell_values(inputs, config, rows, chain, table, _rng(config.seed, _BASELINE, si, r))
        rows_out.extend((r, name, values[name], seed) for name in config.indicators)
        sizes.append(len(selection))
    return {"index": si, "status": "ok", "reason": None, "rows": rows_out, "sizes": sizes}


def _map(fn, tasks, workers: int):
    if workers == 1 or len(tasks) == 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


@dataclass
class EvaluateResult:
    reports: list[ind.IndicatorReport]
    summary: dict
    files: dict[str, Path]
    all_skipped: bool


def _stats(values: Sequence[float]) -> dict:
    a = np.asarray(values, dtype=float)
    return {"mean": float(a.mean()), "std": float(a.std(ddof=1)) if len(a) > 1 else 0.0, "n": int(len(a))}


def evaluate(config: ExperimentConfig) -> EvaluateResult:
    """Run every strategy for ``config.reps`` repetitions and write the results."""
    inputs = load_inputs(config)
    for text in config.strategies:
        parse_spec(text)
    tasks = []
    blocks = max(1, config.workers)
    for si, text in enumerate(config.strategies):
        for b in range(blocks):
            reps = list(range(b, config.reps, blocks))
            if reps:
                tasks.append((inputs, config, si, text, reps))
    results = _map(_run_strategy, tasks, config.workers)

    merged: dict[int, dict] = {}
    for res in results:
        cur = merged.setdefault(res["index"], {"status": "ok", "reason": None, "rows": [], "sizes": []})
        if res["status"] == "skipped":
            cur.update(status="skipped", reason=res["reason"])
        cur["rows"].extend(res["rows"])
        cur["sizes"].extend(res["sizes"])

    order = {name: i for i, name in enumerate(config.indicators)}
    reports: list[ind.IndicatorReport] = []
    summary = {"universe_size": len(inputs.ctx.universe), "mutants": inputs.n_mutants_total,
               "tests": len(inputs.kill.test_ids), "reps": config.reps, "seed": config.seed,
               "strategies": []}
    for si, text in enumerate(config.strategies):
        cur = merged[si]
        entry = {"strategy": text, "status": cur["status"]}
        if cur["status"] == "skipped":
            entry["reason"] = cur["reason"]
            summary["strategies"].append(entry)
            continue
        rows = sorted(cur["rows"], key=lambda x: (x[0], order[x[1]]))
        reports.extend(ind.IndicatorReport(text, r, name, v, s) for r, name, v, s in rows)
        entry["selection_size"] = _stats(cur["sizes"])
        entry["indicators"] = {
            name: _stats([v for _, n2, v, _ in rows if n2 == name]) for name in config.indicators
        }
        summary["strategies"].append(entry)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "indicators": out / "indicators.csv",
        "summary": out / "summary.json",
        "boxplot": out / "boxplot.csv",
    }
    write_reports(reports, files["indicators"])
    write_json(summary, files["summary"])
    write_boxplot(reports, files["boxplot"])
    all_skipped = all(s["status"] == "skipped" for s in summary["strategies"])
    return EvaluateResult(reports, summary, files, all_skipped)


# -- sweep ------------------------------------------------------------------


@dataclass
class SweepResult:
    points: list[tuple[float, str, float, float]]
    skipped: list[dict]
    files: dict[str, Path]


def _sweep_point(inputs, config, chains, spec, si, ri, fixed_rows=None):
    op_sum = erop_sum = 0.0
    size = None
    for r in range(config.reps):
        if fixed_rows is None:
            rng = _rng(config.seed, _SELECT, si, ri, r)
            selection = select(spec, inputs.ctx, rng)
            rows = inputs.kill.mutant_rows(selection.mutant_ids)
        else:
            rows = fixed_rows
        size = len(rows)
        chain, table = chains.get(r, si) if config.unpaired else chains.get(r)
        op_sum += 1.0 - ind._changed_signs(table, rows) / chain.k
        erop_sum += ind.erop_rep(inputs.kill, table, rows, _rng(config.seed, _BASELINE, si, ri, r))
    return op_sum / config.reps, erop_sum / config.reps, size


def sweep(config: ExperimentConfig) -> SweepResult:
    """Mean OP and EROP per (reduction ratio, strategy).

    SMS and fixed selections contribute a single point at their own ratio.
    CMS without an explicit ``k`` clusters into as many groups as SMS selects
    and draws round-robin until the quota is met.
    """
    inputs = load_inputs(config)
    universe = len(inputs.ctx.universe)
    suites = build_suites(config, inputs.kill)
    fixed = SuiteChain.parse(config.chain) if config.chain else None
    chains = _Chains(inputs.kill, suites, config.seed, fixed)
    points, skipped = [], []
    for si, text in enumerate(config.strategies):
        spec = parse_spec(text)
        if isinstance(spec, (SMS, Fixed)):
            selection = select(spec, inputs.ctx, _rng(config.seed, _SELECT, si))
            rows = inputs.kill.mutant_rows(selection.mutant_ids)
            op, erop, size = _sweep_point(inputs, config, chains, spec, si, 0, fixed_rows=rows)
            points.append((ind.rr(universe, size), text, op, erop))
            continue
        if isinstance(spec, CMS) and spec.k is None:
            spec = replace(spec, k=SMS_COUNT)
        for ri, ratio in enumerate(config.ratios):
            n = max(1, int(round((1.0 - ratio) * universe)))
            try:
                op, erop, size = _sweep_point(inputs, config, chains, with_count(spec, n), si, ri)
            except InfeasibleError as exc:
                skipped.append({"ratio": ratio, "strategy": text, "reason": str(exc)})
                continue
            points.append((ind.rr(universe, size), text, op, erop))

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"sweep": out / "sweep.csv", "summary": out / "sweep_summary.json"}
    with files["sweep"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ratio", "strategy", "mean_op", "mean_erop"])
        for ratio, text, op, erop in points:
            w.writerow([_num(ratio), text, _num(op), _num(erop)])
    write_json({"reps": config.reps, "seed": config.seed, "universe_size": universe,
                "points": len(points), "skipped": skipped}, files["summary"])
    return SweepResult(points, skipped, files)


# -- rank -------------------------------------------------------------------


def direction_of(indicator: str) -> Direction:
    if indicator in ind.HIGHER_IS_BETTER:
        return Direction.HIGHER_IS_BETTER
    if indicator in ind.LOWER_IS_BETTER:
        return Direction.LOWER_IS_BETTER
    raise InputError(f"unknown indicator {indicator!r}")


def rank(paths: Iterable, output: Path | str, alpha=0.05, d_threshold=0.2, log1p=False) -> list[tuple]:
    """Scott-Knott ESD rank table over one or more indicator CSVs."""
    samples: dict[str, dict[str, list[float]]] = {}
    paths = list(paths)
    if not paths:
        raise InputError("rank needs at least one indicator CSV")
    for path in paths:
        for rep in read_reports(path):
            direction_of(rep.indicator)
            samples.setdefault(rep.indicator, {}).setdefault(rep.strategy, []).append(rep.value)
    table = []
    for indicator, per_strategy in samples.items():
        result = scott_knott_esd(per_strategy, alpha, d_threshold, direction_of(indicator), log1p)
        for name in per_strategy:
            table.append((indicator, name, result.means[name], result.ranks[name]))
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    with output.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["indicator", "treatment", "mean", "rank"])
        for indicator, name, mean, r in table:
            w.writerow([indicator, name, _num(mean), r])
    return table


# -- oracle & gen -----------------------------------------------------------


def oracle(config: ExperimentConfig, selection_text: str, max_n: int = 16) -> dict:
    """Exhaustive order preservation of one selection plus the closed-form check."""
    inputs = load_inputs(config)
    spec = parse_spec(selection_text)
    seed = sub_seed(config.seed, _SELECT, 0, 0)
    selection = select(spec, inputs.ctx, np.random.default_rng(seed), seed)
    suite = build_suites(config, inputs.kill)[0]
    preserved, changed, total = ind.full_oracle_op(inputs.kill, selection, suite, max_n)
    p = ind.p_count(len(suite))
    return {
        "selection": list(selection.mutant_ids),
        "strategy": format_spec(spec),
        "tests": len(suite),
        "changed": changed,
        "total": total,
        "preserved": preserved,
        "p_count": p,
        "p_count_matches": total == p,
    }


def gen(spec: SynthSpec, output_dir) -> dict[str, Path]:
    kill, cover, ops = generate(spec)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"kill": out / "kill.csv", "coverage": out / "coverage.csv", "operators": out / "operators.csv"}
    write_matrix(kill, files["kill"])
    write_matrix(cover, files["coverage"])
    write_operators(ops, files["operators"])
    return files


# -- files ------------------------------------------------------------------


def _num(x) -> str:
    """Shortest round-trip text for a float."""
    return repr(float(x))


def write_reports(reports: Iterable[ind.IndicatorReport], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["strategy", "rep", "indicator", "value", "seed"])
        for rep in reports:
            w.writerow([rep.strategy, rep.rep, rep.indicator, _num(rep.value), rep.seed])


def read_reports(path) -> list[ind.IndicatorReport]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = ["strategy", "rep", "indicator", "value", "seed"]
    if not rows or rows[0] != header:
        raise InputError(f"{path}:1: header must be {','.join(header)}")
    out = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != 5:
            raise InputError(f"{path}:{r}: expected 5 fields, got {len(row)}")
        try:
            out.append(ind.IndicatorReport(row[0], int(row[1]), row[2], float(row[3]), int(row[4])))
        except ValueError as exc:
            raise InputError(f"{path}:{r}: {exc}") from None
    return out


def write_json(data: dict, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_boxplot(reports: Sequence[ind.IndicatorReport], path) -> None:
    groups: dict[tuple[str, str], list[float]] = {}
    for rep in reports:
        groups.setdefault((rep.indicator, rep.strategy), []).append(rep.value)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["indicator", "strategy", "min", "q1", "median", "q3", "max"])
        for (indicator, strategy), values in groups.items():
            q = np.percentile(values, [0, 25, 50, 75, 100])
            w.writerow([indicator, strategy, *(_num(x) for x in q)])

