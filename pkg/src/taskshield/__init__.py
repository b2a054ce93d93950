"""Shielding of classical planning tasks: minimal action edits that make a goal unreachable."""

from __future__ import annotations

from .benchgen import BenchConfig, generate
from .errors import ShieldError
from .ilp import IlpModel, SolveResult, export_lp, solve
from .pddl import emit_grounded_domain, emit_grounded_problem, load_task
from .plans import EnumerationConfig, PlanSet, enumerate_simple_plans, verify_plan
from .shield import (Budgets, ModificationSet, ShieldReport, apply_modifications, append_goal_action,
                     build_shield_model, extract_modifications, shield)
from .strips import (BlockedAt, GroundAction, Plan, PlanningTask, Valid, apply, applicable, goal_reachable,
                     simulate_plan, validate_task)
from .taskjson import emit_task_json, parse_task_json, read_task, write_task

__version__ = "0.1.0"

__all__ = [
    "BenchConfig", "BlockedAt", "Budgets", "EnumerationConfig", "GroundAction", "IlpModel", "ModificationSet",
    "Plan", "PlanSet", "PlanningTask", "ShieldError", "ShieldReport", "SolveResult", "Valid", "append_goal_action",
    "applicable", "apply", "apply_modifications", "build_shield_model", "emit_grounded_domain",
    "emit_grounded_problem", "emit_task_json", "enumerate_simple_plans", "export_lp", "extract_modifications",
    "generate", "goal_reachable", "load_task", "parse_task_json", "read_task", "shield", "simulate_plan", "solve",
    "validate_task", "verify_plan", "write_task",
]
