"""Exact solver for pure 0-1 linear programs, plus CPLEX-LP export.

The search is depth-first over variables in creation order, trying 0 before 1,
with interval propagation at every node. With ``bound="lp"`` (the default) the
LP relaxation gives a lower bound and the search is iterative deepening on the
objective: the first leaf found under the smallest feasible limit is returned.
With ``bound="none"`` it is classic branch and bound where only strictly better
leaves replace the incumbent. Either way the result is the lexicographically
smallest optimal assignment in branch order.
"""

from __future__ import annotations

import math
import re
import time
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from .errors import SolverTimeout

RELATIONS = ("<=", ">=", "=")
_EPS = 1e-6


@dataclass(frozen=True)
class BinVar:
    index: int
    name: str


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple[tuple[int, int], ...]  # (coefficient, var index)
    relation: str
    bound: int
    name: str = ""

    def activity(self, assignment: Sequence[int]) -> int:
        return sum(c * assignment[j] for c, j in self.terms)

    def satisfied(self, assignment: Sequence[int]) -> bool:
        lhs = self.activity(assignment)
        if self.relation == "<=":
            return lhs <= self.bound
        if self.relation == ">=":
            return lhs >= self.bound
        return lhs == self.bound


class IlpModel:
    """Minimisation model over binary variables."""

    def __init__(self):
        self.vars: list[BinVar] = []
        self.constraints: list[LinearConstraint] = []
        self.objective: list[tuple[int, int]] = []
        self._names: set[str] = set()

    def add_var(self, name: str | None = None) -> int:
        idx = len(self.vars)
        name = f"x{idx}" if name is None else name
        if name in self._names:
            raise ValueError(f"duplicate variable name {name!r}")
        self._names.add(name)
        self.vars.append(BinVar(idx, name))
        return idx

    def add_constraint(self, terms: Iterable[tuple[int, int]], relation: str, bound: int,
                       name: str | None = None) -> LinearConstraint:
        if relation not in RELATIONS:
            raise ValueError(f"unknown relation {relation!r}")
        merged: dict[int, int] = {}
        for c, j in terms:
            if not 0 <= j < len(self.vars):
                raise IndexError(f"variable {j} out of range")
            merged[j] = merged.get(j, 0) + int(c)
        con = LinearConstraint(tuple((c, j) for j, c in merged.items() if c),
                               relation, int(bound), name or f"c{len(self.constraints)}")
        self.constraints.append(con)
        return con

    def minimize(self, terms: Iterable[tuple[int, int]]) -> None:
        merged: dict[int, int] = {}
        for c, j in terms:
            if c < 0:
                raise ValueError("objective coefficients must be non-negative")
            if not 0 <= j < len(self.vars):
                raise IndexError(f"variable {j} out of range")
            merged[j] = merged.get(j, 0) + int(c)
        self.objective = [(c, j) for j, c in merged.items() if c]

    @property
    def num_vars(self) -> int:
        return len(self.vars)

    def objective_value(self, assignment: Sequence[int]) -> int:
        return sum(c * assignment[j] for c, j in self.objective)

    def violated(self, assignment: Sequence[int]) -> list[LinearConstraint]:
        return [con for con in self.constraints if not con.satisfied(assignment)]


@dataclass
class SolverStats:
    nodes: int = 0
    lp_solves: int = 0
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {"nodes": self.nodes, "lp_solves": self.lp_solves, "seconds": round(self.seconds, 6)}


@dataclass
class SolveResult:
    status: str  # "optimal", "infeasible" or "feasible" (timeout incumbent)
    assignment: tuple[int, ...] | None = None
    objective: int | None = None
    stats: SolverStats = field(default_factory=SolverStats)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class Solver(Protocol):
    def solve(self, model: IlpModel, time_limit: float | None = None) -> SolveResult: ...


class _LpRelaxation:
    def __init__(self, rows, n, cost):
        data, ri, ci, b = [], [], [], []
        for r, (terms, rhs) in enumerate(rows):
            for c, j in terms:
                data.append(float(c))
                ri.append(r)
                ci.append(j)
            b.append(float(rhs))
        self.A = csr_matrix((data, (ri, ci)), shape=(len(rows), n)) if rows else None
        self.b = np.array(b) if rows else None
        self.c = np.array(cost, dtype=float)

    def solve(self, val, time_left: float | None = None):
        lo = np.array([0.0 if v < 0 else float(v) for v in val])
        hi = np.array([1.0 if v < 0 else float(v) for v in val])
        options = {} if time_left is None else {"time_limit": max(time_left, 1e-3)}
        res = linprog(self.c, A_ub=self.A, b_ub=self.b, bounds=np.column_stack([lo, hi]),
                      method="highs", options=options)
        if res.status == 2:
            return None
        if res.status != 0:
            # numerical trouble: fall back to the trivial bound
            return float(self.c @ lo), None
        return float(res.fun), res.x


class BranchAndBound:
    """Deterministic depth-first 0-1 branch and bound."""

    def __init__(self, bound: str = "lp"):
        if bound not in ("lp", "none"):
            raise ValueError("bound must be 'lp' or 'none'")
        self.bound = bound

    def solve(self, model: IlpModel, time_limit: float | None = None) -> SolveResult:
        return _Search(model, self.bound == "lp", time_limit).run()


class _Search:
    def __init__(self, model: IlpModel, use_lp: bool, time_limit: float | None):
        self.start = time.monotonic()
        self.deadline = None if time_limit is None else self.start + time_limit
        self.stats = SolverStats()
        self.model = model
        n = model.num_vars
        self.n = n
        # every constraint as one or two "<=" rows
        rows: list[tuple[list[tuple[int, int]], int]] = []
        for con in model.constraints:
            terms = list(con.terms)
            if con.relation in ("<=", "="):
                rows.append((terms, con.bound))
            if con.relation in (">=", "="):
                rows.append(([(-c, j) for c, j in terms], -con.bound))
        self.rows = rows
        self.var_rows: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for r, (terms, _) in enumerate(rows):
            for c, j in terms:
                self.var_rows[j].append((r, c))
        self.minact = [sum(min(0, c) for c, _ in terms) for terms, _ in rows]
        self.cost = [0] * n
        for c, j in model.objective:
            self.cost[j] += c
        self.val = [-1] * n
        self.trail: list[int] = []
        self.obj = 0
        self.lp = _LpRelaxation(rows, n, self.cost) if use_lp and n else None
        self._check_deadline()

    def _assign(self, j: int, v: int) -> list[int]:
        self.val[j] = v
        self.trail.append(j)
        self.obj += self.cost[j] * v
        touched = []
        for r, c in self.var_rows[j]:
            self.minact[r] += c * v - min(0, c)
            touched.append(r)
        return touched

    def _undo(self, mark: int) -> None:
        trail, val, minact = self.trail, self.val, self.minact
        while len(trail) > mark:
            j = trail.pop()
            v = val[j]
            for r, c in self.var_rows[j]:
                minact[r] -= c * v - min(0, c)
            self.obj -= self.cost[j] * v
            val[j] = -1

    def _propagate(self, rows_todo: list[int]) -> bool:
        val, minact, rows = self.val, self.minact, self.rows
        queue = list(rows_todo)
        popped = 0
        while queue:
            popped += 1
            if popped % 65536 == 0:
                self._check_deadline()
            r = queue.pop()
            terms, b = rows[r]
            slack = b - minact[r]
            if slack < 0:
                return False
            for c, j in terms:
                if val[j] < 0 and abs(c) > slack:
                    queue.extend(self._assign(j, 0 if c > 0 else 1))
                    slack = b - minact[r]
        return True

    def _lp_bound(self, parent_x, mark):
        """Reuse the parent's LP point when it agrees with every new fixing."""
        if parent_x is not None:
            x = parent_x[1]
            if x is not None and all(abs(x[j] - self.val[j]) < _EPS for j in self.trail[mark:]):
                return parent_x
        return self._solve_lp()

    def _solve_lp(self):
        self.stats.lp_solves += 1
        out = self.lp.solve(self.val, None if self.deadline is None else self.deadline - time.monotonic())
        self._check_deadline()
        return out

    def _check_deadline(self) -> None:
        if self.deadline is not None and time.monotonic() > self.deadline:
            self.stats.seconds = time.monotonic() - self.start
            raise SolverTimeout(None, self.stats)

    def _tick(self) -> None:
        self.stats.nodes += 1
        self._check_deadline()

    def _dfs(self, limit: int | None, lp_point) -> tuple[int, ...] | None:
        """Lexicographically first leaf (0 before 1) whose objective is at most ``limit``.

        The caller has already propagated the root; on return the trail is back at
        its entry length.
        """
        base = len(self.trail)
        frames: list[list] = []  # [var, trail mark, value tried, lp point of the node]
        ok = True
        next_var = 0
        mark = base
        try:
            while True:
                self._tick()
                if ok and limit is not None and self.obj > limit:
                    ok = False
                if ok and self.lp is not None:
                    lp_point = self._lp_bound(lp_point, mark)
                    if lp_point is None or (limit is not None and math.ceil(lp_point[0] - _EPS) > limit):
                        ok = False
                if ok:
                    j = next_var
                    while j < self.n and self.val[j] >= 0:
                        j += 1
                    if j == self.n:
                        return tuple(self.val)
                    mark = len(self.trail)
                    frames.append([j, mark, 0, lp_point])
                    ok = self._propagate(self._assign(j, 0))
                    next_var = j + 1
                    continue
                while frames:
                    fr = frames[-1]
                    j, mark, v, lp_point = fr
                    self._undo(mark)
                    if v == 0:
                        fr[2] = 1
                        ok = self._propagate(self._assign(j, 1))
                        next_var = j + 1
                        break
                    frames.pop()
                else:
                    return None
        finally:
            self._undo(base)

    def _incumbent_search(self):
        """Classic depth-first branch and bound: only strictly better leaves are kept."""
        best, best_obj = None, None
        try:
            while True:
                leaf = self._dfs(None if best_obj is None else best_obj - 1, None)
                if leaf is None:
                    return best, best_obj
                best = leaf
                best_obj = sum(self.cost[j] * leaf[j] for j in range(self.n))
        except SolverTimeout as exc:
            if best is not None:
                exc.incumbent = SolveResult("feasible", best, best_obj, self.stats)
            raise

    def _deepening_search(self):
        """Raise the objective limit from the LP bound until a leaf exists."""
        root = self._solve_lp()
        if root is None:
            return None, None
        limit = math.ceil(root[0] - _EPS)
        ceiling = sum(self.cost)
        while limit <= ceiling:
            leaf = self._dfs(limit, root)
            if leaf is not None:
                return leaf, sum(self.cost[j] * leaf[j] for j in range(self.n))
            limit += 1
        return None, None

    def run(self) -> SolveResult:
        if not self._propagate(list(range(len(self.rows)))):
            best = None
        elif self.lp is not None:
            best, best_obj = self._deepening_search()
        else:
            best, best_obj = self._incumbent_search()
        self.stats.seconds = time.monotonic() - self.start
        if best is None:
            return SolveResult("infeasible", stats=self.stats)
        return SolveResult("optimal", best, best_obj, self.stats)


def solve(model: IlpModel, time_limit: float | None = None, bound: str = "lp") -> SolveResult:
    """Solve ``model`` to proven optimality or raise SolverTimeout."""
    return BranchAndBound(bound).solve(model, time_limit)


def sanitize_name(name: str) -> str:
    s = re.sub(r"[^A-Za-z0-9_]", "_", name)
    if not s or s[0].isdigit():
        s = "v_" + s
    return s


def _lp_expr(terms, names) -> str:
    parts = []
    for c, j in terms:
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        coef = "" if mag == 1 else f"{mag} "
        parts.append(f"{sign} {coef}{names[j]}")
    if not parts:
        return "0 " + names[0] if names else "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def export_lp(model: IlpModel) -> str:
    """Render the model in CPLEX-LP format (Minimize, Subject To, Binary, End)."""
    names: list[str] = []
    used: set[str] = set()
    for v in model.vars:
        base = sanitize_name(v.name)
        name, k = base, 1
        while name in used:
            name = f"{base}_{k}"
            k += 1
        used.add(name)
        names.append(name)
    out = ["\\ 0-1 model exported by taskshield", "Minimize"]
    out.append(" obj: " + (_lp_expr(model.objective, names) if model.objective else
                            (f"0 {names[0]}" if names else "0")))
    out.append("Subject To")
    rel = {"<=": "<=", ">=": ">=", "=": "="}
    cnames: set[str] = set()
    for i, con in enumerate(model.constraints):
        cname = sanitize_name(con.name or f"c{i}")
        if cname in cnames:
            cname = f"{cname}_{i}"
        cnames.add(cname)
        if not con.terms:
            # constant constraint: keep it with a zero-coefficient dummy so infeasibility survives export
            lhs = f"0 {names[0]}" if names else "0"
        else:
            lhs = _lp_expr(con.terms, names)
        out.append(f" {cname}: {lhs} {rel[con.relation]} {con.bound}")
    out.append("Binary")
    for name in names:
        out.append(f" {name}")
    out.append("End")
    return "\n".join(out) + "\n"
