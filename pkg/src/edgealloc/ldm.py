"""Linear discretization of the allocation problem into a 0-1 ILP.

Grants are restricted to integer multiples of a minimum bandwidth unit and a
minimum compute unit. Choosing ``m`` bandwidth units on access point ``j``
for task ``i`` is the binary ``x_i_j_m``; choosing ``n`` compute units on
server ``k`` is ``y_i_k_n``; ``z_i_j_k`` is the product of the two mapping
decisions. With these, the deadline, mapping and capacity constraints and the
profit objective are all linear.

Variable and row names use positional indices (declaration order of tasks,
access points and servers) so they are safe in LP files whatever the ids are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .model import Assignment, Instance, Solution

LE, GE, EQ = "<=", ">=", "="
FEAS_TOL = 1e-9


class ConsistencyError(ValueError):
    """A valuation selects a mapping without the unit choices backing it."""


def _floor_units(capacity: float, unit: float) -> int:
    q = capacity / unit
    r = round(q)
    # 0.3 / 0.1 evaluates to 2.9999999999999996
    if abs(q - r) <= 1e-9 * max(1.0, abs(q)):
        return int(r)
    return math.floor(q)


@dataclass(frozen=True)
class DiscretizationConfig:
    b_unit: float
    c_unit: float

    def __post_init__(self):
        if not (self.b_unit > 0 and self.c_unit > 0):
            raise ValueError(f"minimum units must be positive, got b_unit={self.b_unit!r}, "
                             f"c_unit={self.c_unit!r}")

    def ap_units(self, bandwidth_capacity: float) -> int:
        return _floor_units(bandwidth_capacity, self.b_unit)

    def server_units(self, compute_capacity: float) -> int:
        return _floor_units(compute_capacity, self.c_unit)


@dataclass(frozen=True)
class Variable:
    name: str
    family: str  # "x", "y" or "z"
    task_id: str
    ap_id: str | None
    server_id: str | None
    units: int = 0


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[tuple[str, float], ...]
    sense: str
    rhs: float

    def activity(self, valuation: Mapping[str, int]) -> float:
        return math.fsum(c * valuation.get(v, 0) for v, c in self.terms)

    def satisfied(self, valuation: Mapping[str, int], tol: float = FEAS_TOL) -> bool:
        lhs = self.activity(valuation)
        slack = tol * max(1.0, abs(self.rhs))
        if self.sense == LE:
            return lhs <= self.rhs + slack
        if self.sense == GE:
            return lhs >= self.rhs - slack
        return abs(lhs - self.rhs) <= slack

    def redundant(self) -> bool:
        """True when every 0-1 valuation satisfies the row."""
        hi = sum(c for _, c in self.terms if c > 0)
        lo = sum(c for _, c in self.terms if c < 0)
        if self.sense == LE:
            return hi <= self.rhs
        if self.sense == GE:
            return lo >= self.rhs
        return False


@dataclass(frozen=True)
class IlpModel:
    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    objective: tuple[tuple[str, float], ...]
    task_index: Mapping[str, int] = field(default_factory=dict)
    ap_index: Mapping[str, int] = field(default_factory=dict)
    server_index: Mapping[str, int] = field(default_factory=dict)
    ap_units: Mapping[str, int] = field(default_factory=dict)
    server_units: Mapping[str, int] = field(default_factory=dict)

    @property
    def var_meta(self) -> dict[str, Variable]:
        return {v.name: v for v in self.variables}

    def x_name(self, task_id: str, ap_id: str, m: int) -> str:
        return f"x_{self.task_index[task_id]}_{self.ap_index[ap_id]}_{m}"

    def y_name(self, task_id: str, server_id: str, n: int) -> str:
        return f"y_{self.task_index[task_id]}_{self.server_index[server_id]}_{n}"

    def z_name(self, task_id: str, ap_id: str, server_id: str) -> str:
        return (f"z_{self.task_index[task_id]}_{self.ap_index[ap_id]}_"
                f"{self.server_index[server_id]}")

    def row(self, name: str) -> Constraint:
        for c in self.constraints:
            if c.name == name:
                return c
        raise KeyError(name)

    def objective_value(self, valuation: Mapping[str, int]) -> float:
        return math.fsum(c * valuation.get(v, 0) for v, c in self.objective)

    def violated(self, valuation: Mapping[str, int], tol: float = FEAS_TOL) -> list[str]:
        unknown = set(valuation) - {v.name for v in self.variables}
        bad = [f"unknown variable {name}" for name in sorted(unknown) if valuation[name]]
        bad += [f"non-binary value for {name}" for name, val in valuation.items() if val not in (0, 1)]
        return bad + [c.name for c in self.constraints if not c.satisfied(valuation, tol)]

    def stats(self) -> dict:
        families = {f: sum(1 for v in self.variables if v.family == f) for f in "xyz"}
        return {
            "variables": len(self.variables),
            "x": families["x"], "y": families["y"], "z": families["z"],
            "rows": len(self.constraints),
            "nonzeros": sum(len(c.terms) for c in self.constraints),
        }


def discretize(instance: Instance, cfg: DiscretizationConfig) -> IlpModel:
    """Build the full 0-1 model for ``instance`` under the minimum units of ``cfg``."""
    task_index = {t.id: n for n, t in enumerate(instance.tasks)}
    ap_index = {a.id: n for n, a in enumerate(instance.aps)}
    server_index = {s.id: n for n, s in enumerate(instance.servers)}
    u = {a.id: cfg.ap_units(a.bandwidth_capacity) for a in instance.aps}
    v = {s.id: cfg.server_units(s.compute_capacity) for s in instance.servers}
    model = IlpModel((), (), (), task_index, ap_index, server_index, u, v)

    variables: list[Variable] = []
    rows: list[Constraint] = []
    objective: list[tuple[str, float]] = []
    ap_load = {a.id: [] for a in instance.aps}
    server_load = {s.id: [] for s in instance.servers}
    z_rows: list[Constraint] = []

    for task in instance.tasks:
        i = task_index[task.id]
        x_of = {}
        for j in task.reachable_aps:
            names = []
            for m in range(1, u[j] + 1):
                name = model.x_name(task.id, j, m)
                variables.append(Variable(name, "x", task.id, j, None, m))
                names.append((name, m))
                ap_load[j].append((name, float(m)))
            x_of[j] = names
        y_of = {}
        for server in instance.servers:
            k = server.id
            names = []
            for n in range(1, v[k] + 1):
                name = model.y_name(task.id, k, n)
                variables.append(Variable(name, "y", task.id, None, k, n))
                names.append((name, n))
                server_load[k].append((name, float(n)))
            y_of[k] = names

        deadline_terms = []
        for j in task.reachable_aps:
            deadline_terms += [(name, task.size / (m * cfg.b_unit)) for name, m in x_of[j]]
        for j in task.reachable_aps:
            for server in instance.servers:
                k = server.id
                if not x_of[j] or not y_of[k]:
                    continue
                z = model.z_name(task.id, j, k)
                variables.append(Variable(z, "z", task.id, j, k))
                objective.append((z, float(task.profit)))
                deadline_terms.append((z, 2 * instance.delay(j, k)))
                xs = [(name, -1.0) for name, _ in x_of[j]]
                ys = [(name, -1.0) for name, _ in y_of[k]]
                suffix = f"{i}_{ap_index[j]}_{server_index[k]}"
                z_rows.append(Constraint(f"zlb_{suffix}", ((z, 1.0), *xs, *ys), GE, -1.0))
                z_rows.append(Constraint(f"zx_{suffix}", ((z, 1.0), *xs), LE, 0.0))
                z_rows.append(Constraint(f"zy_{suffix}", ((z, 1.0), *ys), LE, 0.0))
        for server in instance.servers:
            deadline_terms += [(name, task.cycles / (n * cfg.c_unit)) for name, n in y_of[server.id]]

        if deadline_terms:
            rows.append(Constraint(f"deadline_{i}", tuple(deadline_terms), LE, float(task.deadline)))
        xs = [(name, 1.0) for j in task.reachable_aps for name, _ in x_of[j]]
        if xs:
            rows.append(Constraint(f"ap_once_{i}", tuple(xs), LE, 1.0))
        ys = [(name, 1.0) for k in y_of for name, _ in y_of[k]]
        if ys:
            rows.append(Constraint(f"srv_once_{i}", tuple(ys), LE, 1.0))

    for a in instance.aps:
        if ap_load[a.id]:
            rows.append(Constraint(f"ap_cap_{ap_index[a.id]}", tuple(ap_load[a.id]), LE,
                                   float(u[a.id])))
    for s in instance.servers:
        if server_load[s.id]:
            rows.append(Constraint(f"srv_cap_{server_index[s.id]}", tuple(server_load[s.id]), LE,
                                   float(v[s.id])))
    rows += z_rows
    return IlpModel(tuple(variables), tuple(rows), tuple(objective),
                    task_index, ap_index, server_index, u, v)


def prune(model: IlpModel, instance: Instance, cfg: DiscretizationConfig,
          tol: float = FEAS_TOL) -> IlpModel:
    """Fix to zero every variable that cannot be part of a profitable mapping.

    A ``z`` survives when its pair meets the deadline with the largest grants
    available; an ``x`` (resp. ``y``) survives when some surviving pair through
    it meets the deadline using the largest grant on the other side. Removed
    variables are dropped from every row; rows that become redundant go too.
    The optimal objective is unchanged.
    """
    meta = model.var_meta
    u, v = model.ap_units, model.server_units
    keep: set[str] = set()
    for task in instance.tasks:
        fast_server = {}  # ap -> best 2*delay + processing time over surviving pairs
        fast_ap = {}      # server -> best offload + 2*delay
        for j in task.reachable_aps:
            for s in instance.servers:
                k = s.id
                z = model.z_name(task.id, j, k) if u[j] and v[k] else None
                if z is None or z not in meta:
                    continue
                d2 = 2 * instance.delay(j, k)
                best = task.size / (u[j] * cfg.b_unit) + d2 + task.cycles / (v[k] * cfg.c_unit)
                if best > task.deadline * (1 + tol):
                    continue
                keep.add(z)
                fast_server[j] = min(fast_server.get(j, math.inf),
                                     d2 + task.cycles / (v[k] * cfg.c_unit))
                fast_ap[k] = min(fast_ap.get(k, math.inf), task.size / (u[j] * cfg.b_unit) + d2)
        for j, rest in fast_server.items():
            for m in range(1, u[j] + 1):
                if task.size / (m * cfg.b_unit) + rest <= task.deadline * (1 + tol):
                    keep.add(model.x_name(task.id, j, m))
        for k, rest in fast_ap.items():
            for n in range(1, v[k] + 1):
                if task.cycles / (n * cfg.c_unit) + rest <= task.deadline * (1 + tol):
                    keep.add(model.y_name(task.id, k, n))

    keep &= set(meta)
    rows = []
    for c in model.constraints:
        terms = tuple((name, coef) for name, coef in c.terms if name in keep)
        row = Constraint(c.name, terms, c.sense, c.rhs)
        if terms and not row.redundant():
            rows.append(row)
    return IlpModel(tuple(var for var in model.variables if var.name in keep), tuple(rows),
                    tuple((name, coef) for name, coef in model.objective if name in keep),
                    model.task_index, model.ap_index, model.server_index,
                    model.ap_units, model.server_units)


def extract_solution(instance: Instance, cfg: DiscretizationConfig, model: IlpModel,
                     valuation: Mapping[str, int]) -> Solution:
    """Turn a 0-1 valuation into grants of ``m * b_unit`` and ``n * c_unit``."""
    meta = model.var_meta
    on = [meta[name] for name, val in valuation.items() if val and name in meta]
    xs, ys, zs = {}, {}, {}
    for var in on:
        family = {"x": xs, "y": ys, "z": zs}[var.family]
        family.setdefault(var.task_id, []).append(var)
    out = []
    for task in instance.tasks:
        chosen = zs.get(task.id, [])
        if not chosen:
            continue
        if len(chosen) > 1:
            raise ConsistencyError(f"task {task.id!r} has {len(chosen)} active mappings")
        z = chosen[0]
        x = [var for var in xs.get(task.id, []) if var.ap_id == z.ap_id]
        y = [var for var in ys.get(task.id, []) if var.server_id == z.server_id]
        if len(x) != 1 or len(y) != 1:
            raise ConsistencyError(
                f"task {task.id!r} mapped to ({z.ap_id!r}, {z.server_id!r}) without exactly one "
                f"bandwidth and one compute choice")
        out.append(Assignment(task.id, z.ap_id, z.server_id, x[0].units * cfg.b_unit,
                              y[0].units * cfg.c_unit))
    return Solution.build(instance, out)


def _fmt(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _linear(terms: Iterable[tuple[str, float]], per_line: int = 6) -> list[str]:
    parts = []
    for n, (name, coef) in enumerate(terms):
        sign = "-" if coef < 0 else "+"
        body = f"{_fmt(abs(coef))} {name}"
        parts.append(body if n == 0 and sign == "+" else f"{sign} {body}")
    return [" ".join(parts[n:n + per_line]) for n in range(0, len(parts), per_line)]


def export_lp(model: IlpModel) -> str:
    """Render ``model`` in CPLEX LP text format."""
    out = ["\\ task mapping and allocation, discretized 0-1 model", "Maximize"]
    obj = _linear(model.objective)
    out.append(" obj: " + obj[0] if obj else " obj:")
    out += ["   " + line for line in obj[1:]]
    out.append("Subject To")
    for c in model.constraints:
        lines = _linear(c.terms)
        out.append(f" {c.name}: {lines[0]}")
        out += ["   " + line for line in lines[1:]]
        out.append(f"   {c.sense} {_fmt(c.rhs)}")
    out.append("Binary")
    out += [f" {var.name}" for var in model.variables]
    out.append("End")
    return "\n".join(out) + "\n"
