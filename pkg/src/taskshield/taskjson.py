"""Canonical JSON interchange format for grounded tasks.

    {"fluents": [str], "actions": [{"name": str, "pre": [int], "add": [int],
     "del": [int], "cost": number}], "init": [int], "goal": [int]}

Integers index into ``fluents``.
"""

from __future__ import annotations

import json

import jsonschema

from .errors import TaskSchemaError
from .strips import GroundAction, PlanningTask

_IDS = {"type": "array", "items": {"type": "integer", "minimum": 0}}

TASK_SCHEMA = {
    "type": "object",
    "required": ["fluents", "actions", "init", "goal"],
    "properties": {
        "fluents": {"type": "array", "items": {"type": "string"}},
        "actions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "pre", "add", "del"],
                "properties": {
                    "name": {"type": "string"},
                    "pre": _IDS,
                    "add": _IDS,
                    "del": _IDS,
                    "cost": {"type": "number", "minimum": 0},
                },
            },
        },
        "init": _IDS,
        "goal": _IDS,
    },
}


def _pointer(path) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def task_from_dict(data) -> PlanningTask:
    validator = jsonschema.Draft7Validator(TASK_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: (len(e.absolute_path), list(e.absolute_path)))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        if err.validator == "required":
            missing = [k for k in err.validator_value if k not in err.instance]
            path.append(missing[0])
            raise TaskSchemaError(_pointer(path), "required key is missing")
        raise TaskSchemaError(_pointer(path), err.message)

    n = len(data["fluents"])

    def ids(values, path):
        for k, f in enumerate(values):
            if f >= n:
                raise TaskSchemaError(_pointer(path + [k]), f"fluent index {f} out of range (0..{n - 1})")
        return frozenset(values)

    actions = []
    for i, a in enumerate(data["actions"]):
        base = ["actions", i]
        actions.append(GroundAction(a["name"], ids(a["pre"], base + ["pre"]), ids(a["add"], base + ["add"]),
                                    ids(a["del"], base + ["del"]), a.get("cost", 1)))
    return PlanningTask(tuple(data["fluents"]), tuple(actions),
                        ids(data["init"], ["init"]), ids(data["goal"], ["goal"]))


def parse_task_json(text: str) -> PlanningTask:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TaskSchemaError("", f"invalid JSON: {exc}") from exc
    return task_from_dict(data)


def task_to_dict(task: PlanningTask) -> dict:
    return {
        "fluents": list(task.fluents),
        "actions": [{"name": a.name, "pre": sorted(a.pre), "add": sorted(a.add), "del": sorted(a.delete),
                     "cost": a.cost} for a in task.actions],
        "init": sorted(task.init),
        "goal": sorted(task.goal),
    }


def emit_task_json(task: PlanningTask) -> str:
    return json.dumps(task_to_dict(task), indent=2) + "\n"


def read_task(path) -> PlanningTask:
    with open(path) as fh:
        return parse_task_json(fh.read())


def write_task(task: PlanningTask, path) -> None:
    with open(path, "w") as fh:
        fh.write(emit_task_json(task))
