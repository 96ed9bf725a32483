"""Problem data model for joint task mapping and bandwidth/compute allocation.

An :class:`Instance` holds tasks, access points, servers and the backhaul
delay between every (access point, server) pair. A :class:`Solution` maps a
subset of tasks onto one access point and one server each, together with the
bandwidth and compute granted to the task.

All quantities are dimensionless non-negative reals. Instances and solutions
serialize to JSON documents tagged with ``"schema": 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

SCHEMA_VERSION = 1
EDGE = "edge"
CLOUD = "cloud"


class ValidationError(ValueError):
    """Raised when an instance or document breaks the data model.

    ``violations`` lists every problem found, not just the first.
    """

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class UnknownIdError(LookupError):
    """A solution refers to a task, access point or server the instance lacks."""


@dataclass(frozen=True)
class Task:
    id: str
    size: float
    cycles: float
    deadline: float
    profit: float
    reachable_aps: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "reachable_aps", tuple(self.reachable_aps))


@dataclass(frozen=True)
class AccessPoint:
    id: str
    bandwidth_capacity: float


@dataclass(frozen=True)
class Server:
    id: str
    compute_capacity: float
    kind: str = EDGE
    colocated_ap: str | None = None


@dataclass(frozen=True)
class Topology:
    """Backhaul delay for every (access point id, server id) pair."""

    delay: Mapping[tuple[str, str], float]

    def __post_init__(self):
        object.__setattr__(self, "delay", dict(self.delay))

    def __getitem__(self, pair: tuple[str, str]) -> float:
        return self.delay[pair]

    @classmethod
    def from_matrix(cls, ap_ids: Sequence[str], server_ids: Sequence[str],
                    rows: Sequence[Sequence[float]]) -> "Topology":
        return cls({(j, k): rows[a][b]
                    for a, j in enumerate(ap_ids)
                    for b, k in enumerate(server_ids)})

    def matrix(self, ap_ids: Sequence[str], server_ids: Sequence[str]) -> list[list[float]]:
        return [[self.delay[(j, k)] for k in server_ids] for j in ap_ids]


@dataclass(frozen=True)
class Instance:
    tasks: tuple[Task, ...]
    aps: tuple[AccessPoint, ...]
    servers: tuple[Server, ...]
    topology: Topology
    _task: dict = field(init=False, repr=False, compare=False)
    _ap: dict = field(init=False, repr=False, compare=False)
    _server: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "aps", tuple(self.aps))
        object.__setattr__(self, "servers", tuple(self.servers))
        problems = validate(self)
        if problems:
            raise ValidationError(problems)
        object.__setattr__(self, "_task", {t.id: t for t in self.tasks})
        object.__setattr__(self, "_ap", {a.id: a for a in self.aps})
        object.__setattr__(self, "_server", {s.id: s for s in self.servers})

    def task(self, task_id: str) -> Task:
        try:
            return self._task[task_id]
        except KeyError:
            raise UnknownIdError(f"unknown task {task_id!r}") from None

    def ap(self, ap_id: str) -> AccessPoint:
        try:
            return self._ap[ap_id]
        except KeyError:
            raise UnknownIdError(f"unknown access point {ap_id!r}") from None

    def server(self, server_id: str) -> Server:
        try:
            return self._server[server_id]
        except KeyError:
            raise UnknownIdError(f"unknown server {server_id!r}") from None

    def delay(self, ap_id: str, server_id: str) -> float:
        return self.topology[(ap_id, server_id)]

    @property
    def total_profit(self) -> float:
        return math.fsum(t.profit for t in self.tasks)


def _positive(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) and x > 0


def validate(instance: Instance) -> list[str]:
    """Return every data-model violation in ``instance`` (empty when valid)."""
    problems = []
    for label, items in (("task", instance.tasks), ("access point", instance.aps),
                         ("server", instance.servers)):
        seen = set()
        for item in items:
            if item.id in seen:
                problems.append(f"duplicate {label} id {item.id!r}")
            seen.add(item.id)
    ap_ids = {a.id for a in instance.aps}
    server_ids = [s.id for s in instance.servers]

    for t in instance.tasks:
        for name in ("size", "cycles", "deadline"):
            if not _positive(getattr(t, name)):
                problems.append(f"task {t.id!r}: {name} must be positive, got {getattr(t, name)!r}")
        if not (isinstance(t.profit, (int, float)) and math.isfinite(t.profit) and t.profit >= 0):
            problems.append(f"task {t.id!r}: profit must be non-negative, got {t.profit!r}")
        if not t.reachable_aps:
            problems.append(f"task {t.id!r}: reachable_aps is empty")
        if len(set(t.reachable_aps)) != len(t.reachable_aps):
            problems.append(f"task {t.id!r}: reachable_aps has duplicates")
        for j in t.reachable_aps:
            if j not in ap_ids:
                problems.append(f"task {t.id!r}: unknown access point {j!r}")
    for a in instance.aps:
        if not _positive(a.bandwidth_capacity):
            problems.append(f"access point {a.id!r}: bandwidth_capacity must be positive")
    for s in instance.servers:
        if not _positive(s.compute_capacity):
            problems.append(f"server {s.id!r}: compute_capacity must be positive")
        if s.kind not in (EDGE, CLOUD):
            problems.append(f"server {s.id!r}: kind must be 'edge' or 'cloud', got {s.kind!r}")
        if s.colocated_ap is not None and s.colocated_ap not in ap_ids:
            problems.append(f"server {s.id!r}: unknown colocated access point {s.colocated_ap!r}")

    delay = instance.topology.delay
    for a in instance.aps:
        for s in instance.servers:
            d = delay.get((a.id, s.id))
            if d is None:
                problems.append(f"missing delay for ({a.id!r}, {s.id!r})")
                continue
            if not (isinstance(d, (int, float)) and math.isfinite(d) and d >= 0):
                problems.append(f"delay ({a.id!r}, {s.id!r}) must be non-negative, got {d!r}")
                continue
            colocated = s.colocated_ap == a.id
            if colocated and d != 0:
                problems.append(f"delay ({a.id!r}, {s.id!r}) must be 0 for a colocated pair")
            elif not colocated and d == 0:
                problems.append(f"delay ({a.id!r}, {s.id!r}) is 0 but the pair is not colocated")
    extra = set(delay) - {(a, k) for a in ap_ids for k in server_ids}
    for j, k in sorted(extra):
        problems.append(f"delay given for unknown pair ({j!r}, {k!r})")
    return problems


@dataclass(frozen=True)
class Assignment:
    task_id: str
    ap_id: str
    server_id: str
    bandwidth: float
    compute: float

    def __post_init__(self):
        if not (self.bandwidth > 0 and self.compute > 0):
            raise ValueError(f"task {self.task_id!r}: grants must be positive, "
                             f"got bandwidth={self.bandwidth!r} compute={self.compute!r}")


@dataclass(frozen=True)
class Solution:
    assignments: tuple[Assignment, ...] = ()
    profit: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "assignments", tuple(self.assignments))

    @classmethod
    def build(cls, instance: Instance, assignments: Iterable[Assignment]) -> "Solution":
        """Solution with its profit computed from ``instance``."""
        assignments = tuple(assignments)
        return cls(assignments, objective_value(instance, Solution(assignments)))

    def by_task(self) -> dict[str, Assignment]:
        return {a.task_id: a for a in self.assignments}


def completion_time(task: Task, ap_id: str, server_id: str, bandwidth: float,
                    compute: float, topology: Topology) -> float:
    """Offload time + round-trip backhaul delay + processing time."""
    if not (bandwidth > 0 and compute > 0):
        raise ValueError(f"grants must be positive, got bandwidth={bandwidth!r} compute={compute!r}")
    return task.size / bandwidth + 2 * topology[(ap_id, server_id)] + task.cycles / compute


def objective_value(instance: Instance, solution: Solution) -> float:
    """Total profit of the tasks the solution assigns (each task counted once)."""
    ids = {a.task_id for a in solution.assignments}
    return math.fsum(instance.task(i).profit for i in sorted(ids))


# --- JSON documents -------------------------------------------------------

def instance_to_dict(instance: Instance) -> dict:
    ap_ids = [a.id for a in instance.aps]
    server_ids = [s.id for s in instance.servers]
    servers = []
    for s in instance.servers:
        entry = {"id": s.id, "compute_capacity": s.compute_capacity, "kind": s.kind}
        if s.colocated_ap is not None:
            entry["colocated_ap"] = s.colocated_ap
        servers.append(entry)
    return {
        "schema": SCHEMA_VERSION,
        "tasks": [{"id": t.id, "size": t.size, "cycles": t.cycles, "deadline": t.deadline,
                   "profit": t.profit, "reachable_aps": list(t.reachable_aps)}
                  for t in instance.tasks],
        "access_points": [{"id": a.id, "bandwidth_capacity": a.bandwidth_capacity}
                          for a in instance.aps],
        "servers": servers,
        "delays": instance.topology.matrix(ap_ids, server_ids),
    }


def save_instance(instance: Instance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2) + "\n"


def _require(obj, key, kind, where, problems):
    if not isinstance(obj, dict) or key not in obj:
        problems.append(f"{where}: missing field {key!r}")
        return None
    value = obj[key]
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        problems.append(f"{where}: field {key!r} has wrong type {type(value).__name__}")
        return None
    return value


def instance_from_dict(doc: dict) -> Instance:
    problems: list[str] = []
    if not isinstance(doc, dict):
        raise ValidationError(["document root must be an object"])
    if doc.get("schema") != SCHEMA_VERSION:
        problems.append(f"unsupported schema {doc.get('schema')!r}, expected {SCHEMA_VERSION}")
    for key in ("tasks", "access_points", "servers", "delays"):
        if not isinstance(doc.get(key), list):
            problems.append(f"missing or non-array field {key!r}")
    if problems:
        raise ValidationError(problems)

    tasks, aps, servers = [], [], []
    for n, raw in enumerate(doc["tasks"]):
        where = f"tasks[{n}]"
        vals = [_require(raw, "id", str, where, problems),
                _require(raw, "size", float, where, problems),
                _require(raw, "cycles", float, where, problems),
                _require(raw, "deadline", float, where, problems),
                _require(raw, "profit", float, where, problems),
                _require(raw, "reachable_aps", list, where, problems)]
        if all(v is not None for v in vals):
            tasks.append(Task(vals[0], vals[1], vals[2], vals[3], vals[4], tuple(vals[5])))
    for n, raw in enumerate(doc["access_points"]):
        where = f"access_points[{n}]"
        vals = [_require(raw, "id", str, where, problems),
                _require(raw, "bandwidth_capacity", float, where, problems)]
        if all(v is not None for v in vals):
            aps.append(AccessPoint(*vals))
    for n, raw in enumerate(doc["servers"]):
        where = f"servers[{n}]"
        vals = [_require(raw, "id", str, where, problems),
                _require(raw, "compute_capacity", float, where, problems),
                _require(raw, "kind", str, where, problems)]
        colocated = raw.get("colocated_ap") if isinstance(raw, dict) else None
        if colocated is not None and not isinstance(colocated, str):
            problems.append(f"{where}: field 'colocated_ap' must be a string")
            colocated = None
        if all(v is not None for v in vals):
            servers.append(Server(*vals, colocated_ap=colocated))

    rows = doc["delays"]
    if len(rows) != len(doc["access_points"]):
        problems.append(f"delays has {len(rows)} rows, expected {len(doc['access_points'])}")
    elif any(not isinstance(r, list) or len(r) != len(doc["servers"]) for r in rows):
        problems.append(f"every delays row must have {len(doc['servers'])} entries")
    elif any(not isinstance(d, (int, float)) or isinstance(d, bool) for r in rows for d in r):
        problems.append("delays entries must be numbers")
    if problems:
        raise ValidationError(problems)

    topology = Topology.from_matrix([a.id for a in aps], [s.id for s in servers], rows)
    return Instance(tuple(tasks), tuple(aps), tuple(servers), topology)


def load_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError([f"not valid JSON: {exc}"]) from None
    return instance_from_dict(doc)


def solution_to_dict(solution: Solution) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "assignments": [{"task": a.task_id, "ap": a.ap_id, "server": a.server_id,
                         "bandwidth": a.bandwidth, "compute": a.compute}
                        for a in solution.assignments],
        "profit": solution.profit,
    }


def save_solution(solution: Solution) -> str:
    return json.dumps(solution_to_dict(solution), indent=2) + "\n"


def load_solution(text: str) -> Solution:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError([f"not valid JSON: {exc}"]) from None
    problems: list[str] = []
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA_VERSION:
        raise ValidationError([f"solution document must be an object with schema {SCHEMA_VERSION}"])
    if not isinstance(doc.get("assignments"), list):
        raise ValidationError(["missing or non-array field 'assignments'"])
    out = []
    for n, raw in enumerate(doc["assignments"]):
        where = f"assignments[{n}]"
        vals = [_require(raw, "task", str, where, problems),
                _require(raw, "ap", str, where, problems),
                _require(raw, "server", str, where, problems),
                _require(raw, "bandwidth", float, where, problems),
                _require(raw, "compute", float, where, problems)]
        if any(v is None for v in vals):
            continue
        if vals[3] <= 0 or vals[4] <= 0:
            problems.append(f"{where}: grants must be positive")
            continue
        out.append(Assignment(*vals))
    profit = _require(doc, "profit", float, "solution", problems)
    if problems:
        raise ValidationError(problems)
    return Solution(tuple(out), profit)
