"""STRIPS subset of PDDL: parsing, grounding, and grounded re-emission.

Supported: ``:strips``, ``:typing`` and ``:equality`` requirements, typed
parameters and objects, conjunctive positive preconditions (plus static
``(= ?x ?y)`` / ``(not (= ?x ?y))`` tests), and effects made of atoms and
negated atoms. Everything else is rejected with UnsupportedFeatureError.
"""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass, field

from .errors import GroundingError, PDDLParseError, UnsupportedFeatureError
from .strips import GroundAction, PlanningTask

log = logging.getLogger(__name__)

DEFAULT_MAX_GROUND_ACTIONS = 10**6
SUPPORTED_REQUIREMENTS = {":strips", ":typing", ":equality"}
_UNSUPPORTED_FORMULAS = {"or", "imply", "forall", "exists", "when", "increase", "decrease",
                         "assign", "scale-up", "scale-down", "either", "preference"}


# -- s-expressions -----------------------------------------------------------

class Sym(str):
    line: int = 0
    column: int = 0


class SList(list):
    line: int = 0
    column: int = 0


def _sym(text, line, col):
    s = Sym(text)
    s.line, s.column = line, col
    return s


def read_sexpr(text: str) -> SList:
    """Parse one top-level s-expression; ``;`` starts a comment."""
    stack: list[SList] = []
    result = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0]
        for m in re.finditer(r"\(|\)|[^\s()]+", line):
            tok, col = m.group(), m.start() + 1
            if result is not None:
                raise PDDLParseError(f"unexpected text after end of definition: {tok!r}", lineno, col)
            if tok == "(":
                lst = SList()
                lst.line, lst.column = lineno, col
                stack.append(lst)
            elif tok == ")":
                if not stack:
                    raise PDDLParseError("unbalanced ')'", lineno, col)
                done = stack.pop()
                if stack:
                    stack[-1].append(done)
                else:
                    result = done
            else:
                if not stack:
                    raise PDDLParseError(f"token outside parentheses: {tok!r}", lineno, col)
                stack[-1].append(_sym(tok, lineno, col))
    if stack:
        raise PDDLParseError("unexpected end of input: missing ')'", stack[-1].line, stack[-1].column)
    if result is None:
        raise PDDLParseError("empty input", 1, 1)
    return result


def _pos(node):
    return getattr(node, "line", None), getattr(node, "column", None)


def _kw(node) -> str | None:
    return node.lower() if isinstance(node, str) else None


def _expect_symbol(node, what):
    if not isinstance(node, str):
        raise PDDLParseError(f"expected {what}", *_pos(node))
    return str(node)


# -- ASTs ------------------------------------------------------------------------

Atom = tuple  # (predicate, arg, arg, ...); args are variables "?x" or object names


@dataclass
class ActionSchema:
    name: str
    parameters: list[tuple[str, str]]
    pre: list[Atom] = field(default_factory=list)
    add: list[Atom] = field(default_factory=list)
    delete: list[Atom] = field(default_factory=list)
    equalities: list[tuple[str, str, bool]] = field(default_factory=list)  # (x, y, must_equal)


@dataclass
class DomainAst:
    name: str
    requirements: list[str] = field(default_factory=list)
    types: dict[str, str] = field(default_factory=dict)  # type -> parent
    constants: list[tuple[str, str]] = field(default_factory=list)
    predicates: list[tuple[str, list[tuple[str, str]]]] = field(default_factory=list)
    schemas: list[ActionSchema] = field(default_factory=list)


@dataclass
class ProblemAst:
    name: str
    domain: str
    objects: list[tuple[str, str]] = field(default_factory=list)
    init: list[Atom] = field(default_factory=list)
    goal: list[Atom] = field(default_factory=list)


def _typed_list(items, what) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    i = 0
    while i < len(items):
        it = items[i]
        if isinstance(it, SList):
            head = _kw(it[0]) if it else None
            if head == "either":
                raise UnsupportedFeatureError("either", *_pos(it))
            raise PDDLParseError(f"unexpected list in {what}", *_pos(it))
        if it == "-":
            if i + 1 >= len(items):
                raise PDDLParseError(f"missing type after '-' in {what}", *_pos(it))
            typ = items[i + 1]
            if isinstance(typ, SList):
                if typ and _kw(typ[0]) == "either":
                    raise UnsupportedFeatureError("either", *_pos(typ))
                raise PDDLParseError(f"bad type in {what}", *_pos(typ))
            out.extend((name, str(typ)) for name in pending)
            pending = []
            i += 2
            continue
        pending.append(str(it))
        i += 1
    out.extend((name, "object") for name in pending)
    return out


def _atom(node, what) -> Atom:
    if not isinstance(node, SList) or not node:
        raise PDDLParseError(f"expected an atom in {what}", *_pos(node))
    head = _kw(node[0])
    if head in _UNSUPPORTED_FORMULAS:
        raise UnsupportedFeatureError(head, *_pos(node))
    if head == "not":
        raise UnsupportedFeatureError("negative literal in " + what, *_pos(node))
    if head in ("and", "="):
        raise PDDLParseError(f"expected an atom in {what}", *_pos(node))
    for arg in node:
        if isinstance(arg, SList):
            raise UnsupportedFeatureError("nested term", *_pos(arg))
    return tuple(str(x) for x in node)


def _conjuncts(node) -> list:
    if isinstance(node, SList) and node and _kw(node[0]) == "and":
        return list(node[1:])
    return [node]


def _parse_precondition(node, schema: ActionSchema):
    for c in _conjuncts(node):
        if not isinstance(c, SList) or not c:
            raise PDDLParseError("malformed precondition", *_pos(c))
        head = _kw(c[0])
        if head == "=":
            if len(c) != 3:
                raise PDDLParseError("equality takes two terms", *_pos(c))
            schema.equalities.append((str(c[1]), str(c[2]), True))
        elif head == "not" and len(c) == 2 and isinstance(c[1], SList) and c[1] and _kw(c[1][0]) == "=":
            eq = c[1]
            if len(eq) != 3:
                raise PDDLParseError("equality takes two terms", *_pos(eq))
            schema.equalities.append((str(eq[1]), str(eq[2]), False))
        elif head == "not":
            raise UnsupportedFeatureError("negative-preconditions", *_pos(c))
        else:
            schema.pre.append(_atom(c, "precondition"))


def _parse_effect(node, schema: ActionSchema):
    for c in _conjuncts(node):
        if not isinstance(c, SList) or not c:
            raise PDDLParseError("malformed effect", *_pos(c))
        head = _kw(c[0])
        if head in _UNSUPPORTED_FORMULAS:
            raise UnsupportedFeatureError(head, *_pos(c))
        if head == "not":
            if len(c) != 2:
                raise PDDLParseError("'not' takes one atom", *_pos(c))
            schema.delete.append(_atom(c[1], "effect"))
        else:
            schema.add.append(_atom(c, "effect"))


def _parse_action(node) -> ActionSchema:
    if len(node) < 2:
        raise PDDLParseError("action without a name", *_pos(node))
    schema = ActionSchema(_expect_symbol(node[1], "action name"), [])
    i = 2
    while i < len(node):
        key = _kw(node[i])
        if key is None or i + 1 >= len(node):
            raise PDDLParseError("expected ':parameters', ':precondition' or ':effect'", *_pos(node[i]))
        val = node[i + 1]
        if key == ":parameters":
            if not isinstance(val, SList):
                raise PDDLParseError("parameters must be a list", *_pos(val))
            schema.parameters = _typed_list(val, "parameters")
        elif key == ":precondition":
            _parse_precondition(val, schema)
        elif key == ":effect":
            _parse_effect(val, schema)
        else:
            raise UnsupportedFeatureError(key, *_pos(node[i]))
        i += 2
    params = {v for v, _ in schema.parameters}
    for atom in schema.pre + schema.add + schema.delete:
        for arg in atom[1:]:
            if arg.startswith("?") and arg not in params:
                raise PDDLParseError(f"variable {arg} of action {schema.name} is not a parameter",
                                     *_pos(node))
    for x, y, _ in schema.equalities:
        for arg in (x, y):
            if arg.startswith("?") and arg not in params:
                raise PDDLParseError(f"variable {arg} of action {schema.name} is not a parameter",
                                     *_pos(node))
    return schema


def _header(tree, kind: str) -> str:
    if not isinstance(tree, SList) or not tree or _kw(tree[0]) != "define":
        raise PDDLParseError("expected (define ...)", *_pos(tree))
    if len(tree) < 2 or not isinstance(tree[1], SList) or len(tree[1]) != 2 or _kw(tree[1][0]) != kind:
        raise PDDLParseError(f"expected ({kind} NAME)", *_pos(tree[1] if len(tree) > 1 else tree))
    return str(tree[1][1])


def parse_domain(text: str) -> DomainAst:
    tree = read_sexpr(text)
    dom = DomainAst(_header(tree, "domain"))
    for sec in tree[2:]:
        if not isinstance(sec, SList) or not sec:
            raise PDDLParseError("expected a domain section", *_pos(sec))
        key = _kw(sec[0])
        if key == ":requirements":
            for req in sec[1:]:
                r = str(req).lower()
                if r not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeatureError(r, *_pos(req))
                dom.requirements.append(r)
        elif key == ":types":
            for name, parent in _typed_list(sec[1:], "types"):
                dom.types[name] = parent
        elif key == ":constants":
            dom.constants.extend(_typed_list(sec[1:], "constants"))
        elif key == ":predicates":
            for p in sec[1:]:
                if not isinstance(p, SList) or not p:
                    raise PDDLParseError("malformed predicate declaration", *_pos(p))
                dom.predicates.append((str(p[0]), _typed_list(p[1:], "predicate")))
        elif key == ":action":
            dom.schemas.append(_parse_action(sec))
        else:
            raise UnsupportedFeatureError(str(sec[0]), *_pos(sec))
    arity = {name: len(params) for name, params in dom.predicates}
    for s in dom.schemas:
        for atom in s.pre + s.add + s.delete:
            if atom[0] not in arity:
                raise PDDLParseError(f"action {s.name} uses undeclared predicate {atom[0]}")
            if arity[atom[0]] != len(atom) - 1:
                raise PDDLParseError(f"action {s.name}: predicate {atom[0]} expects {arity[atom[0]]} "
                                     f"arguments, got {len(atom) - 1}")
    return dom


def parse_problem(text: str) -> ProblemAst:
    tree = read_sexpr(text)
    prob = ProblemAst(_header(tree, "problem"), "")
    for sec in tree[2:]:
        if not isinstance(sec, SList) or not sec:
            raise PDDLParseError("expected a problem section", *_pos(sec))
        key = _kw(sec[0])
        if key == ":domain":
            prob.domain = _expect_symbol(sec[1] if len(sec) > 1 else sec, "domain name")
        elif key == ":objects":
            prob.objects.extend(_typed_list(sec[1:], "objects"))
        elif key == ":init":
            for a in sec[1:]:
                if isinstance(a, SList) and a and _kw(a[0]) == "=":
                    raise UnsupportedFeatureError("numeric fluents", *_pos(a))
                prob.init.append(_atom(a, "init"))
        elif key == ":goal":
            if len(sec) != 2:
                raise PDDLParseError("goal takes one formula", *_pos(sec))
            for c in _conjuncts(sec[1]):
                if isinstance(c, SList) and c and _kw(c[0]) == "not":
                    raise UnsupportedFeatureError("negative goal", *_pos(c))
                atom = _atom(c, "goal")
                if any(arg.startswith("?") for arg in atom[1:]):
                    raise PDDLParseError("goal atoms must be ground", *_pos(c))
                prob.goal.append(atom)
        else:
            raise UnsupportedFeatureError(str(sec[0]), *_pos(sec))
    return prob


# -- grounding -------------------------------------------------------------------

def atom_name(atom: Atom) -> str:
    return atom[0] if len(atom) == 1 else f"{atom[0]}({' '.join(atom[1:])})"


def ground(domain: DomainAst, problem: ProblemAst,
           max_actions: int = DEFAULT_MAX_GROUND_ACTIONS) -> PlanningTask:
    """Instantiate every schema over all type-consistent bindings of the objects."""
    if problem.domain and problem.domain.lower() != domain.name.lower():
        raise GroundingError(f"problem is for domain {problem.domain!r}, not {domain.name!r}")
    known_types = {"object"} | set(domain.types) | set(domain.types.values())

    def is_a(t, target):
        seen = set()
        while t not in seen:
            if t == target:
                return True
            seen.add(t)
            t = domain.types.get(t, "object")
        return target == "object"

    obj_type: dict[str, str] = {}
    obj_order: dict[str, int] = {}
    for name, typ in domain.constants + problem.objects:
        if typ not in known_types:
            raise GroundingError(f"object {name} has undeclared type {typ}")
        if name in obj_type and obj_type[name] != typ:
            raise GroundingError(f"object {name} declared twice with different types")
        obj_type[name] = typ
        obj_order.setdefault(name, len(obj_order))

    pred_order = {name: i for i, (name, _) in enumerate(domain.predicates)}
    pred_params = dict(domain.predicates)

    def check_ground(atom, where):
        if atom[0] not in pred_params:
            raise GroundingError(f"{where}: undeclared predicate {atom[0]}")
        params = pred_params[atom[0]]
        if len(params) != len(atom) - 1:
            raise GroundingError(f"{where}: {atom[0]} expects {len(params)} arguments, got {len(atom) - 1}")
        for (_, typ), arg in zip(params, atom[1:]):
            if arg not in obj_type:
                raise GroundingError(f"{where}: unknown object {arg}")
            if not is_a(obj_type[arg], typ):
                raise GroundingError(f"{where}: object {arg} is not of type {typ}")

    for atom in problem.init:
        check_ground(atom, "init")
    for atom in problem.goal:
        check_ground(atom, "goal")

    objects_by_name = sorted(obj_type)
    ground_actions: list[tuple[str, tuple[Atom, ...], tuple[Atom, ...], tuple[Atom, ...]]] = []
    for schema in sorted(domain.schemas, key=lambda s: s.name):
        for _, typ in schema.parameters:
            if typ not in known_types:
                raise GroundingError(f"action {schema.name}: undeclared type {typ}")
        domains = [[o for o in objects_by_name if is_a(obj_type[o], typ)] for _, typ in schema.parameters]
        variables = [v for v, _ in schema.parameters]
        for binding in itertools.product(*domains):
            env = dict(zip(variables, binding))

            def sub(atom):
                return (atom[0],) + tuple(env.get(a, a) for a in atom[1:])

            if any((env.get(x, x) == env.get(y, y)) != want for x, y, want in schema.equalities):
                continue
            pre, add, dele = (tuple(dict.fromkeys(map(sub, part)))
                              for part in (schema.pre, schema.add, schema.delete))
            name = schema.name if not binding else f"{schema.name}({' '.join(binding)})"
            for atom in pre + add + dele:
                check_ground(atom, f"action {name}")
            if set(add) & set(dele):
                log.warning("dropping ground action %s: add and delete effects overlap", name)
                continue
            ground_actions.append((name, pre, add, dele))
            if len(ground_actions) > max_actions:
                raise GroundingError(f"more than {max_actions} ground actions")

    atoms: set[Atom] = {(name,) for name, params in domain.predicates if not params}
    atoms.update(problem.init)
    atoms.update(problem.goal)
    for _, pre, add, dele in ground_actions:
        atoms.update(pre)
        atoms.update(add)
        atoms.update(dele)
    ordered = sorted(atoms, key=lambda a: (pred_order[a[0]], tuple(obj_order[o] for o in a[1:])))
    index = {a: i for i, a in enumerate(ordered)}
    actions = [GroundAction(name, {index[a] for a in pre}, {index[a] for a in add}, {index[a] for a in dele})
               for name, pre, add, dele in ground_actions]
    return PlanningTask(tuple(atom_name(a) for a in ordered), tuple(actions),
                        {index[a] for a in problem.init}, {index[a] for a in problem.goal})


def load_task(domain_text: str, problem_text: str) -> PlanningTask:
    return ground(parse_domain(domain_text), parse_problem(problem_text))


# -- emission --------------------------------------------------------------------

_IDENT = r"[A-Za-z][A-Za-z0-9_\-]*"
_FLUENT_RE = re.compile(rf"^({_IDENT})(?:\(((?:\s*{_IDENT})*)\s*\))?$")


def _identifier(name: str) -> str:
    s = re.sub(r"[^A-Za-z0-9_\-]+", "_", name).strip("_")
    if not s or not s[0].isalpha():
        s = "x_" + s
    return s


def _fluent_atoms(task: PlanningTask) -> list[tuple[str, ...]]:
    """Split fluent names into (predicate, args...); unparseable names become nullary."""
    parsed = []
    for name in task.fluents:
        m = _FLUENT_RE.match(name)
        parsed.append((m.group(1), *(m.group(2) or "").split()) if m else (_identifier(name),))
    arity: dict[str, set[int]] = {}
    for atom in parsed:
        arity.setdefault(atom[0], set()).add(len(atom) - 1)
    out = []
    for atom, name in zip(parsed, task.fluents):
        if len(arity[atom[0]]) > 1:
            atom = (_identifier(name),)
        out.append(atom)
    return out


def _fmt(atom) -> str:
    return "(" + " ".join(atom) + ")"


def _conj(parts: list[str], indent: str) -> str:
    if not parts:
        return "(and)"
    if len(parts) == 1:
        return parts[0]
    return "(and " + ("\n" + indent + "     ").join(parts) + ")"


def emit_grounded_domain(task: PlanningTask, name: str = "grounded") -> str:
    """Write ``task`` as a PDDL domain with one parameterless action per ground action."""
    atoms = _fluent_atoms(task)
    preds: dict[str, int] = {}
    objects: dict[str, None] = {}
    for atom in atoms:
        preds.setdefault(atom[0], len(atom) - 1)
        objects.update(dict.fromkeys(atom[1:]))
    lines = [f"(define (domain {_identifier(name)})", "  (:requirements :strips)"]
    if objects:
        lines.append("  (:constants " + " ".join(objects) + ")")
    lines.append("  (:predicates")
    for p, k in preds.items():
        lines.append("    (" + " ".join([p] + [f"?x{i}" for i in range(k)]) + ")")
    lines.append("  )")
    used: set[str] = set()
    for a in task.actions:
        ident = base = _identifier(a.name)
        k = 1
        while ident.lower() in used:
            ident = f"{base}_{k}"
            k += 1
        used.add(ident.lower())
        pre = [_fmt(atoms[f]) for f in sorted(a.pre)]
        eff = [_fmt(atoms[f]) for f in sorted(a.add)] + [f"(not {_fmt(atoms[f])})" for f in sorted(a.delete)]
        lines += [f"  (:action {ident}",
                  "    :parameters ()",
                  "    :precondition " + _conj(pre, "    "),
                  "    :effect " + _conj(eff, "    ") + ")"]
    lines.append(")")
    return "\n".join(lines) + "\n"


def emit_grounded_problem(task: PlanningTask, name: str = "grounded", domain: str = "grounded") -> str:
    atoms = _fluent_atoms(task)
    init = [_fmt(atoms[f]) for f in sorted(task.init)]
    goal = [_fmt(atoms[f]) for f in sorted(task.goal)]
    lines = [f"(define (problem {_identifier(name)})",
             f"  (:domain {_identifier(domain)})",
             "  (:init" + "".join("\n    " + a for a in init) + ")",
             "  (:goal " + _conj(goal, "  ") + "))"]
    return "\n".join(lines) + "\n"
