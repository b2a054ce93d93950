"""Command-line entry point: ``taskshield <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiment
from .benchgen import BenchConfig, generate
from .errors import ShieldError
from .ilp import export_lp
from .pddl import emit_grounded_domain, emit_grounded_problem, load_task
from .plans import EnumerationConfig, enumerate_simple_plans
from .shield import DEFAULT_TIME_LIMIT, Budgets, append_goal_action, build_shield_model, shield
from .strips import goal_reachable
from .taskjson import read_task, write_task

EXIT_OK = 0
EXIT_NOT_SHIELDED = 2
EXIT_CODES = {
    "parse": 3,
    "ground": 4,
    "enum-budget": 5,
    "ilp-timeout": 6,
    "verify-budget": 7,
    "unshieldable": 8,
}
EXIT_OTHER = 9
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    # exit code 2 is reserved for "solved but not shielded"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _k(text: str) -> str:
    if text.lower() != "all" and (not text.isdigit() or int(text) < 1):
        raise argparse.ArgumentTypeError("expected 'all' or a positive integer")
    return text.lower()


class UsageError(Exception):
    pass


def _load_input(args):
    pddl = args.domain is not None or args.problem is not None
    if pddl and args.task is not None:
        raise UsageError("give either --domain/--problem or --task, not both")
    if args.task is not None:
        return read_task(args.task)
    if args.domain is None or args.problem is None:
        raise UsageError("need --domain and --problem, or --task")
    return load_task(Path(args.domain).read_text(), Path(args.problem).read_text())


def _add_input(p):
    p.add_argument("--domain", help="PDDL domain file")
    p.add_argument("--problem", help="PDDL problem file")
    p.add_argument("--task", help="JSON task file")


def cmd_shield(args) -> int:
    task = _load_input(args)
    budgets = Budgets(time_limit=args.time_limit, refine=not args.no_refine)
    report = shield(task, EnumerationConfig.parse(args.k), budgets)
    diff = report.modifications.to_diff(task)
    if args.out_domain:
        Path(args.out_domain).write_text(emit_grounded_domain(report.modified_task, "shielded"))
    if args.out_problem:
        Path(args.out_problem).write_text(emit_grounded_problem(report.modified_task, "shielded", "shielded"))
    if args.out_task:
        write_task(report.modified_task, args.out_task)
    if args.diff:
        Path(args.diff).write_text(diff)
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    print(f"plans: {len(report.plans)} (complete: {str(report.enumeration_complete).lower()})")
    if report.rounds > 1:
        print(f"refinement rounds: {report.rounds}, plans blocked: {len(report.blocked_plans)}")
    print(f"modifications: {report.num_mods}")
    sys.stdout.write(diff)
    print("verified: " + ("UNSOLVABLE" if report.verified_unsolvable else "SOLVABLE"))
    if report.note:
        print(f"note: {report.note}")
    return EXIT_OK if report.success else EXIT_NOT_SHIELDED


def cmd_enumerate(args) -> int:
    task = _load_input(args)
    plans = enumerate_simple_plans(task, EnumerationConfig.parse(args.k))
    for i, p in enumerate(plans.plans, start=1):
        print(f"plan {i} (cost {p.cost}): " + " ".join(f"({n})" for n in p.action_names(task)))
    print(f"|Π| = {len(plans)} (complete: {str(plans.complete).lower()})")
    return EXIT_OK


def cmd_verify(args) -> int:
    task = _load_input(args)
    print("SOLVABLE" if goal_reachable(task, args.state_cap) else "UNSOLVABLE")
    return EXIT_OK


def cmd_benchgen(args) -> int:
    task, count = generate(BenchConfig(args.plans, args.min, args.max, args.share, args.seed))
    write_task(task, args.out)
    print(f"wrote {args.out}: {len(task.fluents)} fluents, {len(task.actions)} actions, {count} plans")
    return EXIT_OK


def cmd_export_lp(args) -> int:
    task = _load_input(args)
    plans = enumerate_simple_plans(task, EnumerationConfig.parse(args.k))
    model, _ = build_shield_model(*append_goal_action(task, plans))
    Path(args.out).write_text(export_lp(model))
    print(f"wrote {args.out}: {model.num_vars} binary variables, {len(model.constraints)} constraints")
    return EXIT_OK


def cmd_experiment(args) -> int:
    jobs = experiment.load_suite(args.suite)
    if args.time_limit is not None:
        jobs = [experiment.Job(j.domain, j.instance, j.variant, j.source, args.time_limit) for j in jobs]
    rows = experiment.run_jobs(jobs, args.jobs)
    experiment.write_rows(rows, args.out)
    summary = experiment.summarize(rows)
    out = Path(args.out)
    summary_path = args.summary or out.with_name(out.stem + "_summary.csv")
    experiment.write_summary(summary, summary_path)
    print(experiment.format_summary(summary))
    print(f"wrote {args.out} ({len(rows)} rows) and {summary_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="taskshield", description="Make planning tasks unsolvable with minimal action edits.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("shield", help="compute and apply a minimal shielding modification set")
    _add_input(p)
    p.add_argument("--k", type=_k, default="all", help="'all' or the number of plans to block")
    p.add_argument("--time-limit", type=float, default=DEFAULT_TIME_LIMIT, help="seconds for the whole task")
    p.add_argument("--no-refine", action="store_true",
                   help="with --k all, stop after one model even if the result is still solvable")
    p.add_argument("--out-domain", help="write the modified grounded PDDL domain here")
    p.add_argument("--out-problem", help="write the matching grounded PDDL problem here")
    p.add_argument("--out-task", help="write the modified task as JSON here")
    p.add_argument("--diff", help="write the modification diff here")
    p.add_argument("--report", help="write the JSON report here")
    p.set_defaults(func=cmd_shield)

    p = sub.add_parser("enumerate", help="list simple solution plans")
    _add_input(p)
    p.add_argument("--k", type=_k, default="all")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("verify", help="decide solvability by breadth-first search")
    _add_input(p)
    p.add_argument("--state-cap", type=int, default=10**7)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("benchgen", help="generate a synthetic graph task")
    p.add_argument("--plans", type=int, required=True)
    p.add_argument("--min", type=int, required=True)
    p.add_argument("--max", type=int, required=True)
    p.add_argument("--share", type=float, default=0.4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchgen)

    p = sub.add_parser("export-lp", help="write the blocking model in CPLEX-LP format")
    _add_input(p)
    p.add_argument("--k", type=_k, default="all")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("experiment", help="run a suite of instances x variants")
    p.add_argument("--suite", required=True)
    p.add_argument("--out", required=True, help="results CSV")
    p.add_argument("--summary", help="summary CSV (default: <out>_summary.csv)")
    p.add_argument("--time-limit", type=float, help="override the suite's per-task limit")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"taskshield: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ShieldError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.stage, EXIT_OTHER)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
