"""Independent feasibility checker for solutions.

Every solver's output passes through :func:`verify`; it recomputes completion
times and capacity usage from scratch and never trusts a solver's bookkeeping.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

from .model import Instance, Solution, completion_time

DEFAULT_TOL = 1e-9

DEADLINE = "deadline"
AP_UNIQUENESS = "ap_uniqueness"
AP_REACHABILITY = "ap_reachability"
SERVER_UNIQUENESS = "server_uniqueness"
AP_CAPACITY = "ap_capacity"
SERVER_CAPACITY = "server_capacity"


@dataclass(frozen=True)
class Violation:
    constraint: str
    ids: tuple[str, ...]
    magnitude: float


@dataclass
class VerificationReport:
    violations: list[Violation] = field(default_factory=list)
    slack: dict[str, float] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def tags(self) -> set[str]:
        return {v.constraint for v in self.violations}

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "feasible": self.feasible,
            "violations": [{"constraint": v.constraint, "ids": list(v.ids),
                            "magnitude": v.magnitude} for v in self.violations],
            "slack": self.slack,
        }


def verify(instance: Instance, solution: Solution, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Check ``solution`` against the deadline, mapping and capacity constraints.

    Deadlines and capacities are compared with a multiplicative tolerance;
    mapping uniqueness and reachability are checked exactly. Unknown ids raise
    :class:`~edgealloc.model.UnknownIdError` rather than being reported as
    infeasibility.
    """
    for a in solution.assignments:
        instance.task(a.task_id)
        instance.ap(a.ap_id)
        instance.server(a.server_id)

    report = VerificationReport()
    per_task = defaultdict(list)
    for a in solution.assignments:
        per_task[a.task_id].append(a)

    for task_id, items in per_task.items():
        if len(items) > 1:
            aps = {a.ap_id for a in items}
            servers = {a.server_id for a in items}
            exact_repeat = len({(a.ap_id, a.server_id) for a in items}) < len(items)
            if len(aps) > 1 or exact_repeat:
                report.violations.append(Violation(AP_UNIQUENESS, (task_id,), len(items) - 1))
            if len(servers) > 1 or exact_repeat:
                report.violations.append(Violation(SERVER_UNIQUENESS, (task_id,), len(items) - 1))

    for a in solution.assignments:
        task = instance.task(a.task_id)
        if a.ap_id not in task.reachable_aps:
            report.violations.append(Violation(AP_REACHABILITY, (a.task_id, a.ap_id), 1))
        t = completion_time(task, a.ap_id, a.server_id, a.bandwidth, a.compute, instance.topology)
        slack = task.deadline - t
        # a duplicated task keeps its tightest slack
        report.slack[a.task_id] = min(slack, report.slack.get(a.task_id, math.inf))
        if t > task.deadline * (1 + tol):
            report.violations.append(Violation(DEADLINE, (a.task_id,), t - task.deadline))

    bandwidth = defaultdict(list)
    compute = defaultdict(list)
    for a in solution.assignments:
        bandwidth[a.ap_id].append(a.bandwidth)
        compute[a.server_id].append(a.compute)
    for ap in instance.aps:
        used = math.fsum(bandwidth.get(ap.id, ()))
        if used > ap.bandwidth_capacity * (1 + tol):
            report.violations.append(Violation(AP_CAPACITY, (ap.id,), used - ap.bandwidth_capacity))
    for server in instance.servers:
        used = math.fsum(compute.get(server.id, ()))
        if used > server.compute_capacity * (1 + tol):
            report.violations.append(
                Violation(SERVER_CAPACITY, (server.id,), used - server.compute_capacity))
    return report
