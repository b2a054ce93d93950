from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import blocked, edited_actions, min_unsolvable_size, oracle_reachable, random_solvable_task
from taskshield.benchgen import BenchConfig, generate
from taskshield.errors import EmptyPlanSetError, ModificationRangeError, ShieldError, UnshieldableTaskError
from taskshield.ilp import solve
from taskshield.plans import EnumerationConfig, PlanSet, enumerate_simple_plans
from taskshield.shield import (GOAL_ACTION, Budgets, ModificationSet, append_goal_action, apply_modifications,
                               build_shield_model, extract_modifications, shield)
from taskshield.strips import (BlockedAt, GroundAction, Plan, PlanningTask, Valid, apply, applicable, goal_reachable,
                               simulate_plan)


def _model_for(task, config=EnumerationConfig()):
    plans = enumerate_simple_plans(task, config)
    aug, aug_plans = append_goal_action(task, plans)
    model, vm = build_shield_model(aug, aug_plans)
    return plans, aug, aug_plans, model, vm


def test_goal_action_appended(workflow):
    aug, plans = append_goal_action(workflow, enumerate_simple_plans(workflow))
    g = aug.actions[-1]
    assert g.name == GOAL_ACTION and g.pre == workflow.goal and not g.add and not g.delete and g.cost == 0
    assert all(len(p) == 4 and p.steps[-1] == len(aug.actions) - 1 for p in plans)
    assert all(isinstance(simulate_plan(aug, p), Valid) for p in plans)


def test_goal_action_on_empty_plan(workflow):
    _, plans = append_goal_action(workflow, PlanSet((Plan(()),), True))
    assert plans.plans[0].steps == (3,)


def test_workflow_model_shape(workflow):
    _, aug, _, model, vm = _model_for(workflow)
    assert sum(1 for (_, i, _) in vm.s if i > 0) == 48
    assert len(vm.enabled) == 8
    touched = {a for a, _ in vm.pre} | {a for a, _ in vm.addrm} | {a for a, _ in vm.deladd}
    assert touched == {0, 1, 2}
    # objective counts exactly the modification variables
    assert sorted(j for _, j in model.objective) == sorted(vm.modification_vars())


def test_single_action_optimum():
    task = PlanningTask(("g",), (GroundAction("a", add={0}),), frozenset(), frozenset({0}))
    _, _, _, model, _ = _model_for(task)
    assert solve(model).objective == 1


def test_goal_in_init_is_unshieldable():
    task = PlanningTask(("g",), (GroundAction("a", add={0}),), frozenset({0}), frozenset({0}))
    aug, plans = append_goal_action(task, PlanSet((Plan(()),), True))
    with pytest.raises(UnshieldableTaskError):
        build_shield_model(aug, plans)
    with pytest.raises(UnshieldableTaskError, match="empty plan solves task"):
        shield(task)


def test_empty_plan_set_rejected(workflow):
    aug, plans = append_goal_action(workflow, PlanSet((), True))
    with pytest.raises(EmptyPlanSetError):
        build_shield_model(aug, plans)


def test_extract_all_zero(workflow):
    _, _, _, model, vm = _model_for(workflow)
    assert extract_modifications(vm, [0] * model.num_vars).cardinality() == 0


def test_apply_examples(workflow):
    assert apply_modifications(workflow, ModificationSet()) == workflow
    direct, esc = workflow.action_index["direct_approval"], workflow.action_index["escalation"]
    safe, escalated = workflow.fluent_id("safe_client"), workflow.fluent_id("escalated")
    with_pre = apply_modifications(workflow, ModificationSet(pre_additions=frozenset({(direct, safe)})))
    assert safe in with_pre.actions[direct].pre and not goal_reachable(with_pre)
    no_add = apply_modifications(workflow, ModificationSet(add_removals=frozenset({(esc, escalated)})))
    assert escalated not in no_add.actions[esc].add and not goal_reachable(no_add)
    assert no_add.fluents == workflow.fluents and no_add.init == workflow.init and no_add.goal == workflow.goal


def test_apply_range_errors(workflow):
    esc = workflow.action_index["escalation"]
    with pytest.raises(ModificationRangeError):
        apply_modifications(workflow, ModificationSet(pre_additions=frozenset({(9, 0)})))
    with pytest.raises(ModificationRangeError):
        apply_modifications(workflow, ModificationSet(add_removals=frozenset({(esc, 0)})))
    with pytest.raises(ModificationRangeError):
        apply_modifications(workflow, ModificationSet(del_additions=frozenset({(esc, workflow.fluent_id("escalated"))})))


def test_shield_workflow(workflow):
    report = shield(workflow)
    assert report.success and report.num_mods == 1 and report.enumeration_complete
    assert report.solve_result.objective == report.num_mods
    d = report.to_dict()
    json.dumps(d)
    assert d["num_mods"] == 1 and d["success"] is True and len(d["modifications"]) == 1
    assert report.modifications.to_diff(workflow).count("\n") == 1


def test_shield_top1_reports_honestly(workflow):
    report = shield(workflow, EnumerationConfig(1))
    assert len(report.plans) == 1 and not report.enumeration_complete
    assert report.success == (not oracle_reachable(report.modified_task))


def test_shield_already_unsolvable():
    task = PlanningTask(("g", "h"), (GroundAction("a", {1}, {0}),), frozenset(), frozenset({0}))
    report = shield(task)
    assert report.note == "no plans found"
    assert report.success and report.num_mods == 0


def test_shield_budget_errors_are_tagged():
    task, _ = generate(BenchConfig(32, 6, 16, 0.4, 0))
    with pytest.raises(ShieldError) as info:
        shield(task, budgets=Budgets(time_limit=0.05))
    assert info.value.stage in {"enum-budget", "ilp-timeout", "verify-budget"}


def _random_cases(seed, n, **kw):
    rng = random.Random(seed)
    return [random_solvable_task(rng, **kw) for _ in range(n)]


def test_blocking_soundness():
    for task, _ in _random_cases(1, 40, max_plans=6):
        plans, aug, aug_plans, model, vm = _model_for(task)
        r = solve(model)
        assert r.optimal
        mods = extract_modifications(vm, r.assignment)
        assert mods.cardinality() == r.objective
        modified = apply_modifications(aug, mods)
        for p in aug_plans:
            assert isinstance(simulate_plan(modified, p), BlockedAt)


def _layer(vm, assignment, p, i, nf):
    return frozenset(f for f in range(nf) if assignment[vm.s[p, i, f]])


def test_trace_variables_follow_simulation():
    for task, _ in _random_cases(2, 40, max_plans=6):
        _, aug, aug_plans, model, vm = _model_for(task)
        r = solve(model)
        modified = apply_modifications(aug, extract_modifications(vm, r.assignment))
        nf = len(task.fluents)
        for p, plan in enumerate(aug_plans):
            s = frozenset(aug.init)
            assert _layer(vm, r.assignment, p, 0, nf) == s
            for i, a in enumerate(plan.steps, start=1):
                act = modified.actions[a]
                if not act.pre <= s:
                    assert r.assignment[vm.enabled[p, i]] == 0
                    break
                s = (s - act.delete) | act.add
                assert _layer(vm, r.assignment, p, i, nf) == s


def _encode(vm, edits):
    fixed = {}
    for kind, table in (("+pre", vm.pre), ("-add", vm.addrm), ("+del", vm.deladd)):
        for (a, f), j in table.items():
            fixed[j] = int((kind, a, f) in edits)
    return fixed


def test_model_accepts_exactly_the_blocking_sets():
    rng = random.Random(3)
    for task, plans in _random_cases(3, 25, max_plans=4, max_fluents=5, max_actions=4):
        _, aug, aug_plans, model, vm = _model_for(task)
        cands = [("+pre", a, f) for a, f in vm.pre] + [("-add", a, f) for a, f in vm.addrm] + \
                [("+del", a, f) for a, f in vm.deladd]
        for _ in range(15):
            edits = set(rng.sample(cands, rng.randint(0, min(3, len(cands)))))
            acts = edited_actions(aug, edits)
            want = all(blocked(aug, acts, p.steps) for p in aug_plans)
            for j, v in _encode(vm, edits).items():
                model.add_constraint([(1, j)], "=", v)
            got = solve(model).optimal
            del model.constraints[-len(cands):]
            assert got == want, edits


def test_pipeline_matches_unsolvability_oracle():
    for task, _ in _random_cases(4, 40, max_plans=4, max_fluents=4, max_actions=4):
        report = shield(task)
        assert report.success
        assert report.num_mods == min_unsolvable_size(task)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 63), st.sets(st.integers(0, 5)), st.sets(st.integers(0, 5)), st.sets(st.integers(0, 5)),
       st.sampled_from(["+pre", "-add", "+del"]), st.integers(0, 5))
def test_shrinking_edit_is_monotone(state, pre, add, dele, kind, f):
    a = GroundAction("a", pre, add, dele - add)
    task = PlanningTask(tuple(f"f{i}" for i in range(6)), (a,), frozenset(), frozenset())
    table = {"+pre": (f not in a.pre), "-add": (f in a.add), "+del": (f not in a.add and f not in a.delete)}
    if not table[kind]:
        return
    edit = frozenset({(0, f)})
    mods = ModificationSet(edit if kind == "+pre" else frozenset(), edit if kind == "-add" else frozenset(),
                           edit if kind == "+del" else frozenset())
    new = apply_modifications(task, mods).actions[0]
    if applicable(state, new):
        assert applicable(state, a)
        assert apply(state, new) & ~apply(state, a) == 0


def _loop_exposing_task():
    # (a0, a1) loops in the original task because a1 changes nothing there, so it is not a
    # simple plan; the cheapest single edit (a0 deletes p1) turns it into a simple plan
    acts = (GroundAction("a0", set(), {0}), GroundAction("a1", {0}, {0, 1}), GroundAction("a2", {0, 1}, {1, 2}))
    return PlanningTask(("p0", "p1", "p2"), acts, frozenset({1}), frozenset({0, 1}))


def test_single_round_can_leave_task_solvable():
    task = _loop_exposing_task()
    report = shield(task, budgets=Budgets(refine=False))
    assert report.enumeration_complete and report.solve_result.optimal
    assert not report.success
    assert report.success == (not oracle_reachable(report.modified_task))


def test_refinement_restores_unsolvability_at_minimum_size():
    task = _loop_exposing_task()
    report = shield(task)
    assert report.success and report.rounds >= 2
    assert len(report.blocked_plans) > len(report.plans)
    assert report.num_mods == min_unsolvable_size(task)
    assert not oracle_reachable(report.modified_task)


def test_topk_is_never_refined():
    task = _loop_exposing_task()
    report = shield(task, EnumerationConfig(5))
    assert report.rounds == 1 and report.blocked_plans == report.plans
