"""Experiment grid runner: instances x variants -> CSV rows and a per-cell summary."""

from __future__ import annotations

import csv
import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .benchgen import BenchConfig, generate
from .errors import ShieldError
from .pddl import load_task
from .plans import EnumerationConfig
from .shield import Budgets, shield
from .taskjson import read_task

log = logging.getLogger(__name__)

CSV_HEADER = ["domain", "instance", "variant", "solved", "time_total_s", "time_enum_s", "time_ilp_s",
              "time_verify_s", "num_mods", "success"]
SUMMARY_HEADER = ["domain", "variant", "problems", "solved", "time_mean_s", "time_std_s",
                  "num_mods_mean", "num_mods_std", "success"]


@dataclass
class ExperimentRow:
    domain: str
    instance: str
    variant: str
    solved: bool
    time_total_s: float
    time_enum_s: float | None = None
    time_ilp_s: float | None = None
    time_verify_s: float | None = None
    num_mods: int | None = None
    success: int | None = None
    error: str = ""

    def csv_values(self) -> list:
        def num(x):
            return "" if x is None else f"{x:.6f}"

        return [self.domain, self.instance, self.variant, int(self.solved), num(self.time_total_s),
                num(self.time_enum_s), num(self.time_ilp_s), num(self.time_verify_s),
                "" if self.num_mods is None else self.num_mods, "" if self.success is None else self.success]


@dataclass(frozen=True)
class Job:
    domain: str
    instance: str
    variant: str
    source: tuple  # ("benchgen", BenchConfig) | ("json", path) | ("pddl", domain path, problem path)
    time_limit: float | None


def _load(source):
    kind = source[0]
    if kind == "benchgen":
        return generate(source[1])[0]
    if kind == "json":
        return read_task(source[1])
    return load_task(Path(source[1]).read_text(), Path(source[2]).read_text())


def run_job(job: Job) -> ExperimentRow:
    start = time.monotonic()
    try:
        task = _load(job.source)
        report = shield(task, EnumerationConfig.parse(job.variant), Budgets(time_limit=job.time_limit))
    except (ShieldError, OSError, ValueError) as exc:
        stage = getattr(exc, "stage", type(exc).__name__)
        log.info("%s/%s k=%s unsolved: [%s] %s", job.domain, job.instance, job.variant, stage, exc)
        return ExperimentRow(job.domain, job.instance, job.variant, False, time.monotonic() - start,
                             error=f"{stage}: {exc}")
    return ExperimentRow(job.domain, job.instance, job.variant, True, report.time_total, report.time_enum,
                         report.time_ilp, report.time_verify, report.num_mods, int(report.success))


def load_suite(path) -> list[Job]:
    """Expand a suite file into jobs.

    Each instance entry names a ``domain`` label and one of ``benchgen``
    (generator settings plus ``seeds``), ``task`` (JSON file) or ``pddl``
    (``{"domain": ..., "problem": ...}``). Relative paths resolve against the
    suite file.
    """
    path = Path(path)
    suite = json.loads(path.read_text())
    base = path.parent
    variants = [str(v) for v in suite.get("variants", ["10", "100", "all"])]
    limit = suite.get("time_limit", 1800)
    jobs = []
    for entry in suite["instances"]:
        domain = entry["domain"]
        if "benchgen" in entry:
            g = entry["benchgen"]
            for seed in entry.get("seeds", range(10)):
                cfg = BenchConfig(g["plans"], g["min"], g["max"], g.get("share", 0.4), seed)
                for v in variants:
                    jobs.append(Job(domain, f"seed{seed}", v, ("benchgen", cfg), limit))
        elif "task" in entry:
            p = base / entry["task"]
            for v in variants:
                jobs.append(Job(domain, entry.get("instance", p.stem), v, ("json", str(p)), limit))
        elif "pddl" in entry:
            d, pr = base / entry["pddl"]["domain"], base / entry["pddl"]["problem"]
            for v in variants:
                jobs.append(Job(domain, entry.get("instance", pr.stem), v, ("pddl", str(d), str(pr)), limit))
        else:
            raise ValueError(f"instance entry for {domain!r} needs 'benchgen', 'task' or 'pddl'")
    return jobs


def run_jobs(jobs: list[Job], workers: int = 1) -> list[ExperimentRow]:
    if workers <= 1:
        return [run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_job, jobs))


def write_rows(rows: list[ExperimentRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.csv_values())


def summarize(rows: list[ExperimentRow]) -> list[dict]:
    """Mean and population standard deviation per (domain, variant), over solved rows."""
    cells: dict[tuple[str, str], list[ExperimentRow]] = {}
    for r in rows:
        cells.setdefault((r.domain, r.variant), []).append(r)
    out = []
    for (domain, variant), rs in cells.items():
        solved = [r for r in rs if r.solved]
        times = [r.time_total_s for r in solved]
        mods = [r.num_mods for r in solved]
        out.append({
            "domain": domain, "variant": variant, "problems": len(rs), "solved": len(solved),
            "time_mean_s": statistics.fmean(times) if times else None,
            "time_std_s": statistics.pstdev(times) if times else None,
            "num_mods_mean": statistics.fmean(mods) if mods else None,
            "num_mods_std": statistics.pstdev(mods) if mods else None,
            "success": sum(r.success for r in solved),
        })
    return out


def write_summary(summary: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_HEADER)
        w.writeheader()
        for cell in summary:
            w.writerow({k: ("" if v is None else (f"{v:.4f}" if isinstance(v, float) else v))
                        for k, v in cell.items()})


def format_summary(summary: list[dict]) -> str:
    def pm(mean, std, digits=1):
        return "-" if mean is None else f"{mean:.{digits}f} ± {std:.{digits}f}"

    lines = [f"{'domain':<16} {'k':>5} {'#Solved':>8} {'Time (s)':>16} {'#(A′)':>12} {'Success':>8}"]
    for c in summary:
        lines.append(f"{c['domain']:<16} {c['variant']:>5} {c['solved']:>4}/{c['problems']:<3} "
                     f"{pm(c['time_mean_s'], c['time_std_s']):>16} "
                     f"{pm(c['num_mods_mean'], c['num_mods_std']):>12} {c['success']:>8}")
    return "\n".join(lines)
