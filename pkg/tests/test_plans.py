from __future__ import annotations

import random

import pytest

from conftest import oracle_plans, random_task
from taskshield.errors import EnumerationBudgetExceeded
from taskshield.plans import EnumerationConfig, enumerate_simple_plans, verify_plan
from taskshield.strips import GroundAction, Plan, PlanningTask

FIRST = ("submit_application", "direct_approval", "escalation")
SECOND = ("submit_application", "escalation", "direct_approval")


def test_workflow_all(workflow):
    plans = enumerate_simple_plans(workflow, EnumerationConfig())
    assert [p.action_names(workflow) for p in plans] == [FIRST, SECOND]
    assert plans.complete
    assert all(verify_plan(workflow, p) for p in plans)
    assert plans.support == frozenset(range(3))


def test_workflow_top1(workflow):
    plans = enumerate_simple_plans(workflow, EnumerationConfig(1))
    assert [p.action_names(workflow) for p in plans] == [FIRST]
    assert not plans.complete


def test_topk_not_truncated_is_complete(workflow):
    assert enumerate_simple_plans(workflow, EnumerationConfig(5)).complete


def test_goal_in_init_gives_empty_plan():
    task = PlanningTask(("g",), (GroundAction("a", add={0}),), frozenset({0}), frozenset({0}))
    plans = enumerate_simple_plans(task)
    assert Plan(()) in plans.plans


def test_inapplicable_plan_rejected(workflow):
    assert not verify_plan(workflow, Plan.from_names(workflow, ["escalation"]))
    assert not verify_plan(workflow, Plan((42,)))


def test_repeated_state_rejected():
    # a <-> b toggling; goal c reachable from b
    acts = (GroundAction("ab", {0}, {1}, {0}), GroundAction("ba", {1}, {0}, {1}), GroundAction("bc", {1}, {2}, {1}))
    task = PlanningTask(("a", "b", "c"), acts, frozenset({0}), frozenset({2}))
    assert verify_plan(task, Plan.of(task, [0, 2]))
    assert not verify_plan(task, Plan.of(task, [0, 1, 0, 2]))
    assert {p.steps for p in enumerate_simple_plans(task)} == {(0, 2)}


def test_plans_through_goal_states_are_extended():
    # goal g holds after "a"; "b" adds h and keeps g, giving a second, longer simple plan
    acts = (GroundAction("a", set(), {0}), GroundAction("b", {0}, {1}))
    task = PlanningTask(("g", "h"), acts, frozenset(), frozenset({0}))
    assert {p.steps for p in enumerate_simple_plans(task)} == {(0,), (0, 1)}


def test_budget_exceeded_carries_partial(workflow):
    with pytest.raises(EnumerationBudgetExceeded) as info:
        enumerate_simple_plans(workflow, EnumerationConfig(node_budget=2))
    assert not info.value.partial.complete


def test_ordering_uses_cost_first():
    acts = (GroundAction("z_cheap", set(), {0}, cost=1), GroundAction("a_dear", set(), {0}, cost=5))
    task = PlanningTask(("g",), acts, frozenset(), frozenset({0}))
    assert [p.action_names(task) for p in enumerate_simple_plans(task)] == [("z_cheap",), ("a_dear",)]


def test_matches_oracle_and_is_deterministic():
    rng = random.Random(11)
    for _ in range(60):
        task = random_task(rng, max_fluents=7, max_actions=5)
        first = enumerate_simple_plans(task)
        assert {p.steps for p in first} == oracle_plans(task)
        assert enumerate_simple_plans(task) == first


def test_config_parse():
    assert EnumerationConfig.parse("all").k is None
    assert EnumerationConfig.parse("10").label == "10"
    with pytest.raises(ValueError):
        EnumerationConfig(0)
