"""Enumeration of simple (loopless) solution plans."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .errors import EnumerationBudgetExceeded
from .strips import Plan, PlanningTask, Valid, simulate_plan

DEFAULT_NODE_BUDGET = 10**7


@dataclass(frozen=True)
class EnumerationConfig:
    """``k=None`` enumerates every simple plan; otherwise keep the first ``k``."""

    k: int | None = None
    node_budget: int = DEFAULT_NODE_BUDGET

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")

    @classmethod
    def parse(cls, text: str, **kw) -> EnumerationConfig:
        """Accept ``"all"`` or a positive integer, as on the command line."""
        return cls(None if str(text).lower() == "all" else int(text), **kw)

    @property
    def label(self) -> str:
        return "all" if self.k is None else str(self.k)


@dataclass(frozen=True)
class PlanSet:
    plans: tuple[Plan, ...]
    complete: bool

    @property
    def support(self) -> frozenset[int]:
        return frozenset(i for p in self.plans for i in p.steps)

    def __len__(self):
        return len(self.plans)

    def __iter__(self):
        return iter(self.plans)


def plan_order_key(task: PlanningTask, plan: Plan):
    return (plan.cost, len(plan.steps), plan.action_names(task))


def enumerate_simple_plans(task: PlanningTask, config: EnumerationConfig = EnumerationConfig(),
                           deadline: float | None = None) -> PlanSet:
    """Depth-first enumeration of every plan whose state trace has no repeated state.

    Branches are cut only when a successor already lies on the current path, so
    the same state may appear in different plans. Plans that pass through a goal
    state are recorded and then extended further.
    """
    goal = task.goal_mask
    init = task.init_mask
    acts = [(a.pre_mask, ~a.del_mask, a.add_mask) for a in task.actions]
    n = len(acts)

    found: list[tuple[int, ...]] = []
    if goal & ~init == 0:
        found.append(())

    on_path = {init}
    path: list[int] = []
    states = [init]
    # next action index to try at each depth
    cursor = [0]
    expanded = 1
    exhausted = True
    while cursor:
        s = states[-1]
        i = cursor[-1]
        while i < n and acts[i][0] & ~s:
            i += 1
        if i >= n:
            cursor.pop()
            on_path.discard(states.pop())
            if path:
                path.pop()
            continue
        cursor[-1] = i + 1
        _, keep, add = acts[i]
        t = (s & keep) | add
        if t in on_path:
            continue
        expanded += 1
        if expanded > config.node_budget or (
                deadline is not None and expanded % 4096 == 0 and time.monotonic() > deadline):
            exhausted = False
            break
        path.append(i)
        if goal & ~t == 0:
            found.append(tuple(path))
        on_path.add(t)
        states.append(t)
        cursor.append(0)

    plans = sorted((Plan.of(task, steps) for steps in found), key=lambda p: plan_order_key(task, p))
    truncated = config.k is not None and len(plans) > config.k
    if config.k is not None:
        plans = plans[: config.k]
    result = PlanSet(tuple(plans), exhausted and not truncated)
    if not exhausted:
        raise EnumerationBudgetExceeded(result, f"node budget exhausted after {expanded} expansions"
                                        if expanded > config.node_budget else "enumeration deadline passed")
    return result


def verify_plan(task: PlanningTask, plan: Plan) -> bool:
    """True iff ``plan`` executes, reaches the goal and never revisits a state."""
    try:
        out = simulate_plan(task, plan)
    except IndexError:
        return False
    if not isinstance(out, Valid):
        return False
    if task.goal_mask & ~out.final:
        return False
    return len(set(out.trace)) == len(out.trace)
