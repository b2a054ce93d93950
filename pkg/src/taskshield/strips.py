"""Grounded STRIPS tasks, state transitions, plan replay and reachability.

States are Python ints used as bitsets over dense fluent ids; bit ``f`` is set
iff fluent ``f`` holds.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from .errors import InapplicableActionError, ReachabilityLimitExceeded

State = int

DEFAULT_STATE_CAP = 10**7


def mask_of(ids: Iterable[int]) -> State:
    m = 0
    for f in ids:
        m |= 1 << f
    return m


def ids_of(mask: State) -> frozenset[int]:
    out = []
    f = 0
    while mask:
        if mask & 1:
            out.append(f)
        mask >>= 1
        f += 1
    return frozenset(out)


@dataclass(frozen=True)
class GroundAction:
    name: str
    pre: frozenset[int] = frozenset()
    add: frozenset[int] = frozenset()
    delete: frozenset[int] = frozenset()
    cost: float = 1

    def __post_init__(self):
        for attr in ("pre", "add", "delete"):
            object.__setattr__(self, attr, frozenset(getattr(self, attr)))

    @cached_property
    def pre_mask(self) -> State:
        return mask_of(self.pre)

    @cached_property
    def add_mask(self) -> State:
        return mask_of(self.add)

    @cached_property
    def del_mask(self) -> State:
        return mask_of(self.delete)


@dataclass(frozen=True)
class PlanningTask:
    fluents: tuple[str, ...]
    actions: tuple[GroundAction, ...]
    init: frozenset[int]
    goal: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "fluents", tuple(self.fluents))
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "init", frozenset(self.init))
        object.__setattr__(self, "goal", frozenset(self.goal))

    @cached_property
    def fluent_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.fluents)}

    @cached_property
    def action_index(self) -> dict[str, int]:
        return {a.name: i for i, a in enumerate(self.actions)}

    @cached_property
    def init_mask(self) -> State:
        return mask_of(self.init)

    @cached_property
    def goal_mask(self) -> State:
        return mask_of(self.goal)

    def fluent_id(self, name: str) -> int:
        return self.fluent_index[name]

    def state(self, names: Iterable[str]) -> State:
        """Bitset state from fluent names."""
        return mask_of(self.fluent_index[n] for n in names)

    def names(self, state: State) -> set[str]:
        return {self.fluents[f] for f in ids_of(state)}

    def replace_actions(self, actions: Sequence[GroundAction]) -> PlanningTask:
        return PlanningTask(self.fluents, tuple(actions), self.init, self.goal)


@dataclass(frozen=True)
class Plan:
    steps: tuple[int, ...]
    cost: float = 0

    @classmethod
    def of(cls, task: PlanningTask, steps: Sequence[int]) -> Plan:
        return cls(tuple(steps), sum(task.actions[i].cost for i in steps))

    @classmethod
    def from_names(cls, task: PlanningTask, names: Sequence[str]) -> Plan:
        return cls.of(task, [task.action_index[n] for n in names])

    def __len__(self):
        return len(self.steps)

    def action_names(self, task: PlanningTask) -> tuple[str, ...]:
        return tuple(task.actions[i].name for i in self.steps)


@dataclass(frozen=True)
class Valid:
    trace: tuple[State, ...]

    @property
    def final(self) -> State:
        return self.trace[-1]


@dataclass(frozen=True)
class BlockedAt:
    step: int  # 1-based position of the first inapplicable action
    missing: frozenset[int] = field(default_factory=frozenset)


SimulationOutcome = Valid | BlockedAt


def validate_task(task: PlanningTask) -> list[str]:
    """Return a description for every violated task invariant (empty when clean)."""
    out: list[str] = []
    n = len(task.fluents)
    seen: dict[str, int] = {}
    for i, name in enumerate(task.fluents):
        if name in seen:
            out.append(f"duplicate fluent name {name!r} (ids {seen[name]} and {i})")
        seen[name] = i
    names: dict[str, int] = {}
    for i, a in enumerate(task.actions):
        if a.name in names:
            out.append(f"duplicate action name {a.name!r}")
        names[a.name] = i
        for part in ("pre", "add", "delete"):
            bad = sorted(f for f in getattr(a, part) if not 0 <= f < n)
            if bad:
                out.append(f"action {a.name!r}: {part} fluent out of universe {bad}")
        clash = a.add & a.delete
        if clash:
            out.append(f"action {a.name!r}: add and delete effects overlap on {sorted(clash)}")
        if a.cost < 0:
            out.append(f"action {a.name!r}: negative cost {a.cost}")
    for label, ids in (("init", task.init), ("goal", task.goal)):
        bad = sorted(f for f in ids if not 0 <= f < n)
        if bad:
            out.append(f"{label} fluent out of universe {bad}")
    return out


def applicable(state: State, action: GroundAction) -> bool:
    return action.pre_mask & ~state == 0


def apply(state: State, action: GroundAction) -> State:
    if not applicable(state, action):
        missing = sorted(ids_of(action.pre_mask & ~state))
        raise InapplicableActionError(f"{action.name} is not applicable; missing fluents {missing}")
    return (state & ~action.del_mask) | action.add_mask


def simulate_plan(task: PlanningTask, plan: Plan | Sequence[int],
                  actions_override: Sequence[GroundAction] | None = None) -> SimulationOutcome:
    """Replay ``plan`` from the initial state.

    ``actions_override`` replays the same action indices against a modified action
    list of the same length.
    """
    actions = task.actions if actions_override is None else actions_override
    steps = plan.steps if isinstance(plan, Plan) else tuple(plan)
    for i in steps:
        if not 0 <= i < len(actions):
            raise IndexError(f"plan step refers to action {i}, task has {len(actions)}")
    s = task.init_mask
    trace = [s]
    for pos, i in enumerate(steps, start=1):
        a = actions[i]
        if a.pre_mask & ~s:
            return BlockedAt(pos, ids_of(a.pre_mask & ~s))
        s = (s & ~a.del_mask) | a.add_mask
        trace.append(s)
    return Valid(tuple(trace))


def goal_reachable(task: PlanningTask, state_cap: int = DEFAULT_STATE_CAP,
                   deadline: float | None = None) -> bool:
    """Breadth-first search of the full reachable state space.

    Raises ReachabilityLimitExceeded instead of answering when more than
    ``state_cap`` states would be stored or ``deadline`` (a ``time.monotonic``
    value) passes.
    """
    goal = task.goal_mask
    start = task.init_mask
    if goal & ~start == 0:
        return True
    acts = [(a.pre_mask, ~a.del_mask, a.add_mask) for a in task.actions]
    seen = {start}
    frontier = deque([start])
    while frontier:
        s = frontier.popleft()
        if deadline is not None and len(seen) % 1024 == 0 and time.monotonic() > deadline:
            raise ReachabilityLimitExceeded(len(seen), "verification deadline passed")
        for pre, keep, add in acts:
            if pre & ~s:
                continue
            t = (s & keep) | add
            if t in seen:
                continue
            if goal & ~t == 0:
                return True
            seen.add(t)
            if len(seen) > state_cap:
                raise ReachabilityLimitExceeded(len(seen))
            frontier.append(t)
    return False


def reachable_states(task: PlanningTask, state_cap: int = DEFAULT_STATE_CAP) -> set[State]:
    """All states reachable from the initial state (goal ignored)."""
    start = task.init_mask
    seen = {start}
    frontier = deque([start])
    while frontier:
        s = frontier.popleft()
        for a in task.actions:
            if a.pre_mask & ~s:
                continue
            t = (s & ~a.del_mask) | a.add_mask
            if t not in seen:
                seen.add(t)
                if len(seen) > state_cap:
                    raise ReachabilityLimitExceeded(len(seen))
                frontier.append(t)
    return seen
