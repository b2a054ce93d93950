"""Minimal action modifications that block every known plan, and the end-to-end pipeline.

A modification is one of three shrinking edits on a ground action: adding a
precondition, removing an add effect, or adding a delete effect. Shrinking edits
can only remove plans, so blocking every simple plan of the task makes it
unsolvable.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .errors import (EmptyPlanSetError, InvalidTaskError, ModificationRangeError, SolverTimeout,
                     UnshieldableTaskError)
from .ilp import IlpModel, SolveResult, solve
from .plans import EnumerationConfig, PlanSet, enumerate_simple_plans
from .strips import DEFAULT_STATE_CAP, GroundAction, Plan, PlanningTask, goal_reachable, validate_task

log = logging.getLogger(__name__)

GOAL_ACTION = "__goal__"
DEFAULT_TIME_LIMIT = 1800.0


def append_goal_action(task: PlanningTask, plans: PlanSet) -> tuple[PlanningTask, PlanSet]:
    """Add the artificial action whose precondition is the goal and end every plan with it."""
    goal_action = GroundAction(GOAL_ACTION, pre=task.goal, cost=0)
    aug = task.replace_actions(task.actions + (goal_action,))
    g = len(task.actions)
    return aug, PlanSet(tuple(Plan(p.steps + (g,), p.cost) for p in plans.plans), plans.complete)


@dataclass
class VarIndexMap:
    goal_action: int
    pre: dict[tuple[int, int], int] = field(default_factory=dict)
    addrm: dict[tuple[int, int], int] = field(default_factory=dict)
    deladd: dict[tuple[int, int], int] = field(default_factory=dict)
    s: dict[tuple[int, int, int], int] = field(default_factory=dict)
    enabled: dict[tuple[int, int], int] = field(default_factory=dict)
    pre_unsat: dict[tuple[int, int, int], int] = field(default_factory=dict)

    def modification_vars(self) -> list[int]:
        return [*self.pre.values(), *self.addrm.values(), *self.deladd.values()]


def _check_augmented(task: PlanningTask, plans: PlanSet) -> int:
    g = len(task.actions) - 1
    if g < 0 or task.actions[g].name != GOAL_ACTION:
        raise ValueError("task must be augmented with append_goal_action first")
    for p in plans.plans:
        if not p.steps or p.steps[-1] != g:
            raise ValueError("every plan must end with the goal action")
    return g


def build_shield_model(task: PlanningTask, plans: PlanSet,
                       deadline: float | None = None) -> tuple[IlpModel, VarIndexMap]:
    """Build the 0-1 model whose optimum is the fewest edits blocking every plan.

    ``task`` and ``plans`` must come from append_goal_action. The action at
    1-based position i of a plan reads state layer i-1 and writes layer i.
    """
    if not plans.plans:
        raise EmptyPlanSetError("no plans to block: the task is already unsolvable")
    g = _check_augmented(task, plans)
    if any(len(p.steps) == 1 for p in plans.plans):
        raise UnshieldableTaskError()

    nf = len(task.fluents)
    acts = task.actions
    support = sorted({i for p in plans.plans for i in p.steps if i != g})
    m = IlpModel()
    vm = VarIndexMap(goal_action=g)

    for a in support:
        for f in range(nf):
            if f not in acts[a].pre:
                vm.pre[a, f] = m.add_var(f"pre_a{a}_f{f}")
    for a in support:
        for f in sorted(acts[a].add):
            vm.addrm[a, f] = m.add_var(f"addrm_a{a}_f{f}")
    for a in support:
        for f in range(nf):
            if f not in acts[a].delete and f not in acts[a].add:
                vm.deladd[a, f] = m.add_var(f"deladd_a{a}_f{f}")

    init = task.init
    for p, plan in enumerate(plans.plans):
        if deadline is not None and time.monotonic() > deadline:
            raise SolverTimeout(None, None)
        for f in range(nf):
            v = vm.s[p, 0, f] = m.add_var(f"s_p{p}_i0_f{f}")
            m.add_constraint([(1, v)], "=", 1 if f in init else 0, f"init_p{p}_f{f}")
        for i, a in enumerate(plan.steps, start=1):
            act = acts[a]
            unsat = []
            for f in range(nf):
                prev = vm.s[p, i - 1, f]
                if f in act.pre:
                    u = vm.pre_unsat[p, i, f] = m.add_var(f"pu_p{p}_i{i}_f{f}")
                    m.add_constraint([(1, u), (1, prev)], "=", 1, f"pu_eq_p{p}_i{i}_f{f}")
                elif (a, f) in vm.pre:
                    x = vm.pre[a, f]
                    u = vm.pre_unsat[p, i, f] = m.add_var(f"pu_p{p}_i{i}_f{f}")
                    m.add_constraint([(1, u), (-1, x), (1, prev)], ">=", 0, f"pu_lo_p{p}_i{i}_f{f}")
                    m.add_constraint([(1, u), (-1, x)], "<=", 0, f"pu_pre_p{p}_i{i}_f{f}")
                    m.add_constraint([(1, u), (1, prev)], "<=", 1, f"pu_st_p{p}_i{i}_f{f}")
                else:
                    continue
                unsat.append(u)
            en = vm.enabled[p, i] = m.add_var(f"en_p{p}_i{i}")
            m.add_constraint([(1, en)] + [(1, u) for u in unsat], ">=", 1, f"enabled_p{p}_i{i}")
            for f in range(nf):
                prev = vm.s[p, i - 1, f]
                nxt = vm.s[p, i, f] = m.add_var(f"s_p{p}_i{i}_f{f}")
                tag = f"p{p}_i{i}_f{f}"
                if f in act.add:
                    r = vm.addrm[a, f]
                    # kept add effect: fluent holds; removed: frame
                    m.add_constraint([(1, nxt), (1, r)], ">=", 1, f"add_keep_{tag}")
                    m.add_constraint([(1, nxt), (-1, prev), (1, r)], "<=", 1, f"add_up_{tag}")
                    m.add_constraint([(-1, nxt), (1, prev), (1, r)], "<=", 1, f"add_dn_{tag}")
                elif f in act.delete:
                    m.add_constraint([(1, nxt)], "=", 0, f"del_{tag}")
                elif (a, f) in vm.deladd:
                    d = vm.deladd[a, f]
                    m.add_constraint([(1, nxt), (1, d)], "<=", 1, f"deladd_{tag}")
                    m.add_constraint([(1, nxt), (-1, prev), (-1, d)], "<=", 0, f"frame_up_{tag}")
                    m.add_constraint([(-1, nxt), (1, prev), (-1, d)], "<=", 0, f"frame_dn_{tag}")
                else:
                    m.add_constraint([(1, nxt), (-1, prev)], "=", 0, f"frame_{tag}")
        n = len(plan.steps)
        m.add_constraint([(1, vm.enabled[p, i]) for i in range(1, n + 1)], "<=", n - 1, f"block_p{p}")

    m.minimize((1, v) for v in vm.modification_vars())
    return m, vm


@dataclass(frozen=True)
class ModificationSet:
    pre_additions: frozenset[tuple[int, int]] = frozenset()
    add_removals: frozenset[tuple[int, int]] = frozenset()
    del_additions: frozenset[tuple[int, int]] = frozenset()

    def cardinality(self) -> int:
        return len(self.pre_additions) + len(self.add_removals) + len(self.del_additions)

    def __len__(self):
        return self.cardinality()

    def edits(self) -> list[tuple[int, str, int]]:
        """(action, kind, fluent) triples in a stable order."""
        kinds = {"+pre": 0, "-add": 1, "+del": 2}
        out = [(a, "+pre", f) for a, f in self.pre_additions]
        out += [(a, "-add", f) for a, f in self.add_removals]
        out += [(a, "+del", f) for a, f in self.del_additions]
        return sorted(out, key=lambda e: (e[0], kinds[e[1]], e[2]))

    def to_diff(self, task: PlanningTask) -> str:
        return "".join(f"ACTION {task.actions[a].name}: {k} {task.fluents[f]}\n" for a, k, f in self.edits())

    def to_json(self, task: PlanningTask) -> list[dict]:
        return [{"action": task.actions[a].name, "edit": k, "fluent": task.fluents[f]}
                for a, k, f in self.edits()]


def extract_modifications(varmap: VarIndexMap, assignment) -> ModificationSet:
    return ModificationSet(
        frozenset(k for k, v in varmap.pre.items() if assignment[v]),
        frozenset(k for k, v in varmap.addrm.items() if assignment[v]),
        frozenset(k for k, v in varmap.deladd.items() if assignment[v]),
    )


def apply_modifications(task: PlanningTask, mods: ModificationSet) -> PlanningTask:
    """Return the task with every edit in ``mods`` applied to its actions."""
    nf, na = len(task.fluents), len(task.actions)
    pre: dict[int, set[int]] = {}
    rm: dict[int, set[int]] = {}
    dl: dict[int, set[int]] = {}
    for kind, edits, bucket in (("+pre", mods.pre_additions, pre), ("-add", mods.add_removals, rm),
                                ("+del", mods.del_additions, dl)):
        for a, f in edits:
            if not (0 <= a < na and 0 <= f < nf):
                raise ModificationRangeError(f"{kind} edit ({a}, {f}) out of range")
            act = task.actions[a]
            if kind == "+pre" and f in act.pre:
                raise ModificationRangeError(f"{act.name} already requires fluent {f}")
            if kind == "-add" and f not in act.add:
                raise ModificationRangeError(f"{act.name} does not add fluent {f}")
            if kind == "+del" and (f in act.delete or f in act.add):
                raise ModificationRangeError(f"{act.name} cannot gain delete effect {f}")
            bucket.setdefault(a, set()).add(f)
    if not (pre or rm or dl):
        return task
    actions = []
    for i, a in enumerate(task.actions):
        if i in pre or i in rm or i in dl:
            a = GroundAction(a.name, a.pre | pre.get(i, set()), a.add - rm.get(i, set()),
                             a.delete | dl.get(i, set()), a.cost)
        actions.append(a)
    return task.replace_actions(actions)


@dataclass(frozen=True)
class Budgets:
    time_limit: float | None = DEFAULT_TIME_LIMIT
    state_cap: int = DEFAULT_STATE_CAP
    solver_bound: str = "lp"
    refine: bool = True


@dataclass
class ShieldReport:
    task: PlanningTask
    config: EnumerationConfig
    plans: PlanSet
    modifications: ModificationSet
    modified_task: PlanningTask
    solve_result: SolveResult | None
    verified_unsolvable: bool
    time_enum: float
    time_ilp: float
    time_verify: float
    note: str = ""
    blocked_plans: PlanSet | None = None  # plans the final model blocks; grows past ``plans`` when refined
    rounds: int = 0

    @property
    def success(self) -> bool:
        return self.verified_unsolvable

    @property
    def enumeration_complete(self) -> bool:
        return self.plans.complete

    @property
    def num_mods(self) -> int:
        return self.modifications.cardinality()

    @property
    def time_total(self) -> float:
        return self.time_enum + self.time_ilp + self.time_verify

    def to_dict(self) -> dict:
        t = self.task
        sr = self.solve_result
        return {
            "variant": self.config.label,
            "plans": [list(p.action_names(t)) for p in self.plans.plans],
            "num_plans": len(self.plans),
            "num_blocked_plans": len(self.blocked_plans or self.plans),
            "rounds": self.rounds,
            "enumeration_complete": self.enumeration_complete,
            "modifications": self.modifications.to_json(t),
            "num_mods": self.num_mods,
            "solver": None if sr is None else {"status": sr.status, "objective": sr.objective,
                                               **sr.stats.as_dict()},
            "verified_unsolvable": self.verified_unsolvable,
            "success": self.success,
            "timings": {"enum_s": self.time_enum, "ilp_s": self.time_ilp,
                        "verify_s": self.time_verify, "total_s": self.time_total},
            "note": self.note,
        }


def shield(task: PlanningTask, config: EnumerationConfig = EnumerationConfig(),
           budgets: Budgets = Budgets()) -> ShieldReport:
    """Enumerate plans, find the fewest blocking edits, apply them, verify by search.

    With a complete plan set the result is re-checked: an edit can turn a looping
    solution of the original task into a simple solution of the modified one, so
    while the modified task stays solvable its simple plans (which also solve the
    original task) join the set and the model is solved again. Every round is a
    relaxation of "make the task unsolvable", so the final set is still minimum.
    Top-k variants and ``budgets.refine=False`` stop after the first round.

    Budget and timeout errors propagate; each carries the ``stage`` it came from.
    """
    problems = validate_task(task)
    if problems:
        raise InvalidTaskError(problems)
    start = time.monotonic()
    deadline = None if budgets.time_limit is None else start + budgets.time_limit

    def remaining():
        return None if deadline is None else max(0.0, deadline - time.monotonic())

    plans = enumerate_simple_plans(task, config, deadline=deadline)
    t_enum = time.monotonic() - start
    if any(len(p) == 0 for p in plans.plans):
        raise UnshieldableTaskError()

    t_ilp = t_verify = 0.0
    note = ""
    result = None
    mods = ModificationSet()
    blocking = plans
    rounds = 0
    while True:
        t0 = time.monotonic()
        if blocking.plans:
            aug, aug_plans = append_goal_action(task, blocking)
            model, varmap = build_shield_model(aug, aug_plans, deadline)
            result = solve(model, remaining(), bound=budgets.solver_bound)
            rounds += 1
            if result.optimal:
                mods = extract_modifications(varmap, result.assignment)
            else:
                note = "no modification set blocks the computed plans"
        else:
            note = "no plans found"
        modified = apply_modifications(task, mods)
        t_ilp += time.monotonic() - t0

        t0 = time.monotonic()
        unsolvable = not goal_reachable(modified, budgets.state_cap, deadline)
        t_verify += time.monotonic() - t0
        if unsolvable or not (budgets.refine and config.k is None and result is not None and result.optimal):
            break
        t0 = time.monotonic()
        extra = enumerate_simple_plans(modified, EnumerationConfig(node_budget=config.node_budget), deadline)
        t_enum += time.monotonic() - t0
        known = {p.steps for p in blocking.plans}
        # plans of the modified task are solutions of the original one, with the same step indices
        fresh = tuple(Plan.of(task, p.steps) for p in extra.plans if p.steps not in known)
        log.info("round %d left %d simple plans unblocked; re-solving", rounds, len(fresh))
        blocking = PlanSet(blocking.plans + fresh, blocking.complete)
    return ShieldReport(task, config, plans, mods, modified, result, unsolvable,
                        t_enum, t_ilp, t_verify, note, blocking, rounds)
