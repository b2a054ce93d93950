"""Shared fixtures and independent oracles.

The oracles below work on frozensets of fluent ids and never call the
package's search, enumeration or solver code, so they can be used to check it.
"""

from __future__ import annotations

import itertools
import random
from pathlib import Path

import networkx as nx
import pytest

from taskshield.pddl import load_task
from taskshield.strips import GroundAction, PlanningTask

DATA = Path(__file__).parent / "data"
IPC_TASKS = ("blocks", "gripper", "logistics")


def load_pddl_pair(name: str) -> PlanningTask:
    return load_task((DATA / f"{name}_domain.pddl").read_text(), (DATA / f"{name}_problem.pddl").read_text())


@pytest.fixture
def workflow() -> PlanningTask:
    return load_pddl_pair("workflow")


# -- set-based semantics -----------------------------------------------------------


def step(state: frozenset, action: GroundAction) -> frozenset | None:
    if not action.pre <= state:
        return None
    return (state - action.delete) | action.add


def oracle_reachable(task: PlanningTask) -> bool:
    init = frozenset(task.init)
    seen, stack = {init}, [init]
    while stack:
        s = stack.pop()
        if task.goal <= s:
            return True
        for a in task.actions:
            t = step(s, a)
            if t is not None and t not in seen:
                seen.add(t)
                stack.append(t)
    return False


def oracle_plans(task: PlanningTask) -> set[tuple[int, ...]]:
    """Every simple plan, via simple edge paths in the explicit state graph."""
    init = frozenset(task.init)
    g = nx.MultiDiGraph()
    g.add_node(init)
    seen, stack = {init}, [init]
    while stack:
        s = stack.pop()
        for i, a in enumerate(task.actions):
            t = step(s, a)
            if t is None or t == s:
                continue
            g.add_edge(s, t, key=i)
            if t not in seen:
                seen.add(t)
                stack.append(t)
    plans = set()
    if task.goal <= init:
        plans.add(())
    for target in seen:
        if target != init and task.goal <= target:
            for path in nx.all_simple_edge_paths(g, init, target):
                plans.add(tuple(key for _, _, key in path))
    return plans


def blocked(task: PlanningTask, actions, steps) -> bool:
    s = frozenset(task.init)
    for i in steps:
        s = step(s, actions[i])
        if s is None:
            return True
    return False


# -- modification candidates ---------------------------------------------------------


def candidate_edits(task: PlanningTask, action_ids) -> list[tuple[str, int, int]]:
    out = []
    nf = len(task.fluents)
    for a in sorted(action_ids):
        act = task.actions[a]
        out += [("+pre", a, f) for f in range(nf) if f not in act.pre]
        out += [("-add", a, f) for f in sorted(act.add)]
        out += [("+del", a, f) for f in range(nf) if f not in act.add and f not in act.delete]
    return out


def edited_actions(task: PlanningTask, edits) -> list[GroundAction]:
    acts = list(task.actions)
    for kind, a, f in edits:
        x = acts[a]
        if kind == "+pre":
            acts[a] = GroundAction(x.name, x.pre | {f}, x.add, x.delete, x.cost)
        elif kind == "-add":
            acts[a] = GroundAction(x.name, x.pre, x.add - {f}, x.delete, x.cost)
        else:
            acts[a] = GroundAction(x.name, x.pre, x.add, x.delete | {f}, x.cost)
    return acts


def min_blocking_size(task: PlanningTask, plans, max_size: int = 6) -> int | None:
    """Smallest number of edits after which every plan in ``plans`` is blocked."""
    plans = [tuple(p) for p in plans]
    support = {i for p in plans for i in p}
    cands = candidate_edits(task, support)
    for size in range(max_size + 1):
        for combo in itertools.combinations(cands, size):
            acts = edited_actions(task, combo)
            if all(blocked(task, acts, p) for p in plans):
                return size
    return None


def min_unsolvable_size(task: PlanningTask, max_size: int = 6) -> int | None:
    """Smallest number of edits (on any action) after which the goal is unreachable."""
    cands = candidate_edits(task, range(len(task.actions)))
    for size in range(max_size + 1):
        for combo in itertools.combinations(cands, size):
            if not oracle_reachable(task.replace_actions(edited_actions(task, combo))):
                return size
    return None


# -- random instances ----------------------------------------------------------------


def random_task(rng: random.Random, max_fluents: int = 6, max_actions: int = 5) -> PlanningTask:
    nf = rng.randint(3, max_fluents)
    na = rng.randint(2, max_actions)
    fl = range(nf)
    actions = []
    for i in range(na):
        pre = set(rng.sample(fl, rng.randint(0, 2)))
        add = set(rng.sample(fl, rng.randint(1, 2)))
        rest = [f for f in fl if f not in add]
        dele = set(rng.sample(rest, rng.randint(0, min(2, len(rest)))))
        actions.append(GroundAction(f"a{i}", pre, add, dele))
    init = set(rng.sample(fl, rng.randint(1, max(1, nf // 2))))
    goal = set(rng.sample(fl, rng.randint(1, 2)))
    return PlanningTask(tuple(f"p{f}" for f in fl), tuple(actions), frozenset(init), frozenset(goal))


def random_solvable_task(rng: random.Random, max_plans: int = 6, **kw) -> tuple[PlanningTask, set]:
    """A random task with between 1 and ``max_plans`` simple plans, none of them empty."""
    while True:
        task = random_task(rng, **kw)
        if task.goal <= task.init:
            continue
        plans = oracle_plans(task)
        if 1 <= len(plans) <= max_plans:
            return task, plans


# -- acceptance reporting --------------------------------------------------------------

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(cid, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    cid, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        verdict = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        _ACCEPTANCE[cid] = (title, verdict)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE):
        title, verdict = _ACCEPTANCE[cid]
        terminalreporter.write_line(f"{cid} {verdict}: {title}")
