"""perspectival run | chsh | feasible | check | replay.

Exit status: 0 success, 1 criterion or analysis failure, 2 configuration error
(including a run count too small for the requested tolerance).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from typing import Sequence

from .acceptance import FAIL, INSUFFICIENT, run_acceptance
from .bell import ATOMS, PARTIES, BellError, chsh, feasible_range, joint_feasible
from .config import SCENARIOS, ConfigError, RunConfig, load_config, parse_table
from .harness import ReplayMismatch, execute, replay, write_outputs
from .relativity import RelativityError
from .scenarios import ScenarioError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perspectival", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="execute a built-in scenario or a config file")
    src = run.add_mutually_exclusive_group()
    src.add_argument("--scenario", choices=SCENARIOS, help="built-in scenario (default four-party)")
    src.add_argument("--config", help="scenario config file")
    run.add_argument("--beta", type=float, action="append", help="frame velocity; repeat for several frames")
    run.add_argument("--runs", type=int, help="runs per frame")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="directory for report.txt, result.json (and CSVs with --format csv)")
    run.add_argument("--format", choices=("csv", "text"))

    ch = sub.add_parser("chsh", help="CHSH value of a correlation table file")
    ch.add_argument("table")

    fe = sub.add_parser("feasible", help="joint-distribution feasibility and range query for a table file")
    fe.add_argument("table")
    fe.add_argument("--target", help="pair whose feasible range to report, e.g. bc (overrides [query])")

    ck = sub.add_parser("check", help="run the acceptance suite")
    ck.add_argument("--runs", type=int, help="override every statistical criterion's run count")
    ck.add_argument("--seed", type=int, default=0)
    ck.add_argument("--only", type=lambda s: [int(x) for x in s.split(",")], help="comma-separated criterion numbers")

    rp = sub.add_parser("replay", help="re-execute a stored result.json and confirm identical output")
    rp.add_argument("result", help="result.json or the directory holding it")
    rp.add_argument("--out", help="write the regenerated outputs here")
    rp.add_argument("--format", choices=("csv", "text"))
    return p


def _run(args: argparse.Namespace) -> int:
    base = load_config(args.config) if args.config else RunConfig(scenario=args.scenario or "four-party")
    overrides = {
        "betas": tuple(args.beta) if args.beta else None,
        "runs": args.runs,
        "seed": args.seed,
        "out": args.out,
        "format": args.format,
    }
    config = dataclasses.replace(base, **{k: v for k, v in overrides.items() if v is not None})
    result = execute(config)
    if config.out:
        for path in write_outputs(result, config.out):
            print(f"wrote {path}", file=sys.stderr)
    sys.stdout.write(result.aggregates_csv() if config.format == "csv" and not config.out else result.text_report())
    return result.exit_code


def _load_table(path: str):
    with open(path, encoding="utf-8") as fh:
        return parse_table(fh.read())


def _chsh(args: argparse.Namespace) -> int:
    q = _load_table(args.table)
    s = chsh(q.table, q.pairing)
    for pair in q.pairing:
        print(f"E({''.join(pair)}) = {q.table.expectation(pair):+.6f}")
    print(f"S = {s:+.12f}")
    print(f"|S| {'>' if abs(s) > 2 else '<='} 2: " + ("no joint distribution reproduces these pairs" if abs(s) > 2 else "within the classical bound"))
    return EXIT_OK


def _feasible(args: argparse.Namespace) -> int:
    q = _load_table(args.table)
    target = tuple(args.target) if args.target else q.target
    ok, witness = joint_feasible(q.table)
    print("feasible" if ok else "infeasible")
    if witness is not None:
        print("witness (atoms a b c d with positive weight):")
        for atom, w in zip(ATOMS, witness.weights):
            if w > 1e-12:
                print("  " + " ".join(f"{v:+d}" for v in atom) + f"  {w:.6f}")
        print(f"  max constraint residual {witness.max_violation(q.table):.2e}")
    if target is not None:
        if len(target) != 2 or any(t not in PARTIES for t in target):
            raise ConfigError(f"invalid target pair {''.join(target)!r}")
        if ok:
            lo, hi = feasible_range(q.table, target)
            print(f"range of E({''.join(target)}): [{lo:+.12f}, {hi:+.12f}]")
        else:
            print(f"range of E({''.join(target)}): empty (constraints infeasible)")
    return EXIT_OK


def _check(args: argparse.Namespace) -> int:
    results = run_acceptance(args.runs, args.seed, args.only, emit=print)
    statuses = {r.status for r in results}
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    if FAIL in statuses:
        return EXIT_FAIL
    return EXIT_CONFIG if INSUFFICIENT in statuses else EXIT_OK


def _replay(args: argparse.Namespace) -> int:
    result = replay(args.result)
    if args.out:
        for path in write_outputs(result, args.out, args.format):
            print(f"wrote {path}", file=sys.stderr)
    print("replay reproduced the stored result exactly", file=sys.stderr)
    sys.stdout.write(result.text_report())
    return result.exit_code


_VERBS = {"run": _run, "chsh": _chsh, "feasible": _feasible, "check": _check, "replay": _replay}


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _VERBS[args.verb](args)
    except (ConfigError, ScenarioError, RelativityError, BellError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ReplayMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
