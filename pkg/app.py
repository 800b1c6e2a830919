#!/usr/bin/env python3
"""Command-line entry point.

Exit codes: 0 pass, 1 failed test or runtime error, 2 invalid configuration
or parameters, 3 underpowered test.
"""

import argparse
import json
import sys
from typing import Dict, List, Optional

from loguru import logger
from pydantic import ValidationError

from config import configure_logging
from core.directing import PiecewiseLinearFn, canonicalize
from core.errors import RearrangementError, UnderpoweredError
from core.exactgeom import atom_measures, identity_line, n2_conditional_rank, partition2
from core.pointprocess import render_number
from core.rankcore import (
    Permutation,
    RankTuple,
    permutation_from_initial_ranks,
    rank_array,
)
from orchestrator.sritest import (
    dyadic_partition,
    partition_from_config,
    run_single_rank_test,
    run_sri_test,
)
from orchestrator.trial_runner import TrialRunner
from schemas.experiment import ExperimentConfig
from schemas.report import SriReport

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_UNDERPOWERED = 3


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Read the JSON config, let flags override it, then validate"""
    raw: Dict = {}
    if args.config:
        with open(args.config) as handle:
            raw = json.load(handle)
    for flag in ("seed", "trials", "alpha", "workers", "out", "format"):
        value = getattr(args, flag, None)
        if value is not None:
            raw[flag] = value
    return ExperimentConfig.model_validate(raw)


def emit(text: str, out: Optional[str]) -> None:
    """Write report data to --out or stdout, never to stderr"""
    if out:
        with open(out, "w") as handle:
            handle.write(text)
        logger.info(f"wrote {out}")
    else:
        sys.stdout.write(text)


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args)
    runner = TrialRunner(config.spec, config.seed, config.trials, workers=config.workers)
    records = runner.records()
    fmt = config.format or "jsonl"
    if fmt == "json":
        text = json.dumps([r.model_dump() for r in records]) + "\n"
    elif fmt == "csv":
        n = config.spec.n
        header = (["trial"] + [f"x{i}" for i in range(1, n + 1)] + [f"mu{i}" for i in range(1, n + 1)]
                  + [f"y{i}" for i in range(1, n + 1)] + [f"R{i}" for i in range(1, n + 1)])
        lines = [",".join(header)]
        for r in records:
            lines.append(",".join(str(v) for v in [r.trial] + r.x_desc + r.mu + r.y + r.ranks))
        text = "\n".join(lines) + "\n"
    else:
        text = "".join(r.model_dump_json(exclude_none=True) + "\n" for r in records)
    emit(text, config.out)
    return EXIT_PASS


def _render_sri(report, fmt: str) -> str:
    results = report.results.values() if isinstance(report, SriReport) else [report]
    if fmt == "csv":
        return "".join(f"# k={r.k} p={r.chi_square.p_value}\n" + r.table.to_csv() for r in results)
    return report.model_dump_json(indent=2) + "\n"


def cmd_sri(args: argparse.Namespace) -> int:
    config = load_config(args)
    if config.k is not None:
        partition = (partition_from_config(config.partitions[config.k], config.k)
                     if config.k in config.partitions else None)
        result = run_single_rank_test(config.spec, config.k, partition, trials=config.trials,
                                      alpha=config.alpha, master_seed=config.seed,
                                      workers=config.workers)
        emit(_render_sri(result, config.format or "json"), config.out)
        if result.extreme_rank_contradiction:
            logger.error("extreme-rank contradiction flagged; see report")
        return EXIT_PASS if result.passed else EXIT_FAIL

    partitions = {k: partition_from_config(config.partitions[k], k) if k in config.partitions
                  else dyadic_partition(k) for k in range(2, config.spec.n + 1)}
    report = run_sri_test(config.spec, partitions, trials=config.trials, alpha=config.alpha,
                          master_seed=config.seed, workers=config.workers)
    emit(_render_sri(report, config.format or "json"), config.out)
    if report.extreme_rank_contradiction:
        logger.error("extreme-rank contradiction flagged; see report")
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_exact2(args: argparse.Namespace) -> int:
    part = partition2(args.theta, args.c)
    measures = atom_measures(part.theta, part.c)
    conditionals = n2_conditional_rank(part.theta, part.c)
    lines = [f"theta = {part.theta}  c = {part.c}  alpha = {part.alpha}"]
    for name, length in zip(("l1", "l2", "l3"), part.lengths()):
        lines.append(f"{name} = {length} ({float(length):.6f})")
    for (i, j), mass in sorted(measures.m.items()):
        lines.append(f"m(X{i}{j}) = {mass} ({float(mass):.6f})")
    lines.append(identity_line(part.theta, part.c))
    lines.append(f"P(R2=2 | Y1 in I1) = {conditionals.given_i1}")
    lines.append(f"P(R2=2 | Y1 in I3) = {conditionals.given_i3}")
    if args.format == "json":
        payload = {"theta": str(part.theta), "c": str(part.c),
                   "lengths": [str(v) for v in part.lengths()],
                   "atoms": {f"X{i}{j}": str(v) for (i, j), v in sorted(measures.m.items())},
                   "identity": identity_line(part.theta, part.c),
                   "identity_holds": measures.identity_holds(),
                   "conditionals": conditionals.model_dump()}
        emit(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", args.out)
    else:
        emit("\n".join(lines) + "\n", args.out)
    return EXIT_PASS


def _join(values) -> str:
    return " ".join(str(v) for v in values)


def cmd_ranks(args: argparse.Namespace) -> int:
    values: List[int] = [int(v) for v in args.values]
    if args.mode == "ranks":
        s = permutation_from_initial_ranks(RankTuple.of(values))
    else:
        s = Permutation.of(values)
    rho = rank_array(s)
    lines = ["rank array (row j, column k):"]
    lines.extend(_join(row) for row in rho.entries)
    lines.append(f"diagonal: {_join(rho.diagonal().ranks)}")
    lines.append(f"permutation: {_join(permutation_from_initial_ranks(rho.diagonal()).images)}")
    emit("\n".join(lines) + "\n", args.out)
    return EXIT_PASS


def cmd_canonicalize(args: argparse.Namespace) -> int:
    if args.function:
        f = PiecewiseLinearFn.from_json(args.function)
    else:
        f = PiecewiseLinearFn.of(args.breakpoints, args.values)
    canonical = canonicalize(f)
    payload = canonical.to_json()
    if args.format == "json":
        emit(json.dumps(payload) + "\n", args.out)
    else:
        pairs = zip(canonical.breakpoints, canonical.values)
        emit("\n".join(f"{render_number(b)} -> {render_number(v)}" for b, v in pairs) + "\n", args.out)
    return EXIT_PASS


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--trials", type=int, help="number of trials")
    parser.add_argument("--alpha", type=float, help="significance level")
    parser.add_argument("--workers", type=int, help="worker processes")
    parser.add_argument("--out", help="output path (default stdout)")
    parser.add_argument("--format", choices=["json", "csv", "jsonl"], help="output format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Rank statistics of rearranged uniform samples")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="dump trial records")
    _add_run_flags(simulate)
    simulate.set_defaults(handler=cmd_simulate)

    sri = sub.add_parser("sri", help="test strong rank independence")
    _add_run_flags(sri)
    sri.set_defaults(handler=cmd_sri)

    exact2 = sub.add_parser("exact2", help="exact geometry for two observations")
    exact2.add_argument("--theta", required=True, help="rational in (0, 1), e.g. 1/3")
    exact2.add_argument("--c", required=True, help="rational in [0, 1)")
    exact2.add_argument("--out")
    exact2.add_argument("--format", choices=["text", "json"], default="text")
    exact2.set_defaults(handler=cmd_exact2)

    ranks = sub.add_parser("ranks", help="rank array of a permutation or rank tuple")
    ranks.add_argument("values", nargs="+")
    ranks.add_argument("--mode", choices=["perm", "ranks"], default="perm")
    ranks.add_argument("--out")
    ranks.set_defaults(handler=cmd_ranks)

    canon = sub.add_parser("canonicalize", help="measure-preserving form of a directing function")
    canon.add_argument("--function", help='JSON {"breakpoints": [...], "values": [...]}')
    canon.add_argument("--breakpoints", nargs="+")
    canon.add_argument("--values", nargs="+")
    canon.add_argument("--out")
    canon.add_argument("--format", choices=["text", "json"], default="json")
    canon.set_defaults(handler=cmd_canonicalize)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except UnderpoweredError as e:
        logger.error(f"underpowered: {e}")
        return EXIT_UNDERPOWERED
    except (ValidationError, RearrangementError, json.JSONDecodeError) as e:
        logger.error(f"invalid input: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
