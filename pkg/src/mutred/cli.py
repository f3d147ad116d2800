"""``mutred`` command line.

Exit codes: 0 success, 2 input error, 3 every strategy infeasible,
4 resource guard tripped.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import harness
from .errors import DomainError, InfeasibleError, InputError, ResourceError
from .synth import SynthSpec

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_RESOURCE = 0, 2, 3, 4

log = logging.getLogger("mutred")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("inputs and run control")
    g.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    g.add_argument("--kill", dest="kill_path", help="kill matrix CSV")
    g.add_argument("--coverage", dest="coverage_path",
                   help="coverage matrix CSV (default: the kill matrix, with a warning)")
    g.add_argument("--operators", dest="operators_path", help="mutant_id,operator CSV")
    g.add_argument("--seed", type=int)
    g.add_argument("--reps", type=int)
    g.add_argument("--out", dest="output_dir", help="output directory")
    g.add_argument("--unpaired", action="store_true", default=None,
                   help="draw separate chains per strategy instead of sharing them")
    g.add_argument("--chain", help="fixed chain, e.g. 't1,t2,t3,t4;t1,t2;t1'")
    g.add_argument("--suite-mode", dest="suite_mode",
                   help="full | even-thinned (drop 0-based even positions) | random-half=N")
    g.add_argument("--workers", type=int)
    g.add_argument("-v", "--verbose", action="count", default=0)
    return p


def _strategy_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", dest="strategies", action="append",
                   help="strategy spec, repeatable (rms:n=10, cos:..., sms, cms:n=10,init=sms, "
                        "pipe:[drop:largest;rms:n=4], fixed:m1|m2)")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="mutred", description="Evaluate mutant reduction strategies.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", parents=[common], help="per-repetition indicators for each strategy")
    _strategy_args(p)
    p.add_argument("--indicators", help="comma-separated subset of " + ",".join(harness.ind.INDICATORS))
    p.add_argument("--baseline-reps", dest="baseline_reps", type=int,
                   help="random selections per ES baseline (default 100)")
    p.add_argument("--nop-pairs", dest="nop_pairs", type=int, help="pairs per NOP value (default 100*k)")

    p = sub.add_parser("sweep", parents=[common], help="mean OP/EROP across reduction ratios")
    _strategy_args(p)
    p.add_argument("--ratios", help="comma-separated ratios in [0, 1) (default 0.95..0.0 step 0.05)")

    p = sub.add_parser("rank", help="Scott-Knott ESD rank table from indicator CSVs")
    p.add_argument("inputs", nargs="+", help="indicators.csv files written by evaluate")
    p.add_argument("--out", default="ranks.csv", help="output CSV path")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--d-threshold", dest="d_threshold", type=float, default=0.2)
    p.add_argument("--sk-log1p", dest="log1p", action="store_true", help="log1p-transform values first")
    p.add_argument("-v", "--verbose", action="count", default=0)

    p = sub.add_parser("oracle", parents=[common], help="exhaustive order preservation (small suites)")
    p.add_argument("--selection", required=True, help="strategy spec, usually fixed:m1|m2")
    p.add_argument("--max-n", dest="max_n", type=int, default=16)

    p = sub.add_parser("gen", help="write a synthetic kill/coverage/operator fixture")
    p.add_argument("--mutants", type=int, required=True)
    p.add_argument("--tests", type=int, required=True)
    p.add_argument("--cover-density", type=float, default=0.3)
    p.add_argument("--kill-given-cover", type=float, default=0.5)
    p.add_argument("--n-operators", type=int, default=7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


_CONFIG_KEYS = (
    "kill_path", "coverage_path", "operators_path", "seed", "reps", "output_dir", "unpaired",
    "chain", "suite_mode", "workers", "strategies", "baseline_reps", "nop_pairs",
)


def _config(args) -> harness.ExperimentConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    if getattr(args, "indicators", None):
        overrides["indicators"] = [s.strip() for s in args.indicators.split(",") if s.strip()]
    if getattr(args, "ratios", None):
        try:
            overrides["ratios"] = [float(s) for s in args.ratios.split(",") if s.strip()]
        except ValueError:
            raise InputError(f"bad --ratios {args.ratios!r}") from None
    if args.config:
        return harness.ExperimentConfig.from_json(args.config, **overrides)
    if not overrides.get("kill_path"):
        raise InputError("--kill is required (or give it in --config)")
    return harness.ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def run(args) -> int:
    if args.command == "gen":
        spec = SynthSpec(args.mutants, args.tests, args.cover_density, args.kill_given_cover,
                         args.n_operators, args.seed)
        for path in harness.gen(spec, args.out).values():
            print(path)
        return EXIT_OK
    if args.command == "rank":
        harness.rank(args.inputs, args.out, args.alpha, args.d_threshold, args.log1p)
        print(args.out)
        return EXIT_OK

    config = _config(args)
    if args.command == "evaluate":
        result = harness.evaluate(config)
        for entry in result.summary["strategies"]:
            if entry["status"] == "skipped":
                log.warning("skipped %s: %s", entry["strategy"], entry["reason"])
        for path in result.files.values():
            print(path)
        return EXIT_INFEASIBLE if result.all_skipped else EXIT_OK
    if args.command == "sweep":
        result = harness.sweep(config)
        for item in result.skipped:
            log.info("skipped %s at ratio %s: %s", item["strategy"], item["ratio"], item["reason"])
        for path in result.files.values():
            print(path)
        return EXIT_INFEASIBLE if not result.points else EXIT_OK
    if args.command == "oracle":
        print(json.dumps(harness.oracle(config, args.selection, args.max_n), indent=2))
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(args)
    except (InputError, DomainError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except InfeasibleError as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    except ResourceError as exc:
        log.error("%s", exc)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
