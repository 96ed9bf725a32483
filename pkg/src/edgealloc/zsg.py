"""Zero-slack greedy heuristic.

Every (task, access point, server) option is sized so the task finishes
exactly at its deadline: the time left after the round-trip backhaul delay
is split between offloading and processing in proportion to the task's
relative pressure on each resource. Options are ranked by profit per unit of
fractional resource usage and committed greedily in a single pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import AccessPoint, Assignment, Instance, Server, Solution, Task, Topology

CAPACITY_TOL = 1e-9


class OptionInfeasible(ValueError):
    """The backhaul round trip alone uses up the task's deadline."""


@dataclass(frozen=True)
class OptionCandidate:
    task_id: str
    ap_id: str
    server_id: str
    gamma: float
    required_bandwidth: float
    required_compute: float
    priority: float


def gamma_split(task: Task, ap: AccessPoint, server: Server) -> float:
    """Fraction of the non-transmission time budget spent offloading.

    Solves ``g / (1 - g) = (size / b_j) / (cycles / c_k)`` for ``g``.
    """
    offload = task.size * server.compute_capacity
    return offload / (offload + task.cycles * ap.bandwidth_capacity)


def _budget(task: Task, ap_id: str, server_id: str, topology: Topology) -> float:
    budget = task.deadline - 2 * topology[(ap_id, server_id)]
    if budget <= 0:
        raise OptionInfeasible(
            f"task {task.id!r} via ({ap_id!r}, {server_id!r}): deadline {task.deadline} "
            f"does not exceed the round-trip delay")
    return budget


def required_bandwidth(task: Task, ap_id: str, server_id: str, gamma: float,
                       topology: Topology) -> float:
    return task.size / (gamma * _budget(task, ap_id, server_id, topology))


def required_compute(task: Task, ap_id: str, server_id: str, gamma: float,
                     topology: Topology) -> float:
    return task.cycles / ((1 - gamma) * _budget(task, ap_id, server_id, topology))


def priority(task: Task, ap: AccessPoint, server: Server, bandwidth: float, compute: float) -> float:
    return task.profit / ((bandwidth / ap.bandwidth_capacity) * (compute / server.compute_capacity))


def candidates(instance: Instance) -> list[OptionCandidate]:
    """All deadline-feasible options, sorted by priority (ties by ids)."""
    out = []
    topo = instance.topology
    for task in instance.tasks:
        for j in task.reachable_aps:
            ap = instance.ap(j)
            for server in instance.servers:
                k = server.id
                if task.deadline - 2 * topo[(j, k)] <= 0:
                    continue
                g = gamma_split(task, ap, server)
                b = required_bandwidth(task, j, k, g, topo)
                c = required_compute(task, j, k, g, topo)
                out.append(OptionCandidate(task.id, j, k, g, b, c,
                                           priority(task, ap, server, b, c)))
    out.sort(key=lambda o: (-o.priority, o.task_id, o.ap_id, o.server_id))
    return out


def zsg_solve(instance: Instance) -> Solution:
    """Greedy single pass over the ranked options.

    An option commits when both its access point and its server still have
    room for its zero-slack grants; the task's other options are then dropped.
    """
    granted_b = {a.id: [] for a in instance.aps}
    granted_c = {s.id: [] for s in instance.servers}
    done: set[str] = set()
    chosen = []
    for opt in candidates(instance):
        if opt.task_id in done:
            continue
        cap_b = instance.ap(opt.ap_id).bandwidth_capacity
        cap_c = instance.server(opt.server_id).compute_capacity
        # same fsum-based test the verifier applies, so committed grants always verify
        if math.fsum(granted_b[opt.ap_id] + [opt.required_bandwidth]) > cap_b * (1 + CAPACITY_TOL):
            continue
        if math.fsum(granted_c[opt.server_id] + [opt.required_compute]) > cap_c * (1 + CAPACITY_TOL):
            continue
        granted_b[opt.ap_id].append(opt.required_bandwidth)
        granted_c[opt.server_id].append(opt.required_compute)
        done.add(opt.task_id)
        chosen.append(Assignment(opt.task_id, opt.ap_id, opt.server_id,
                                 opt.required_bandwidth, opt.required_compute))
    return Solution.build(instance, chosen)
