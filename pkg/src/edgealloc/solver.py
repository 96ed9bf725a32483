"""Exact solvers for the discretized problem.

Both solvers work on per-task option lists rather than on the raw 0-1
matrix: a :class:`TaskOption` is one consistent setting of ``x_i_j_m``,
``y_i_k_n`` and ``z_i_j_k`` that meets the task's deadline. Capacities are
integer unit budgets per access point and per server.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .ldm import ConsistencyError, DiscretizationConfig, IlpModel, discretize, extract_solution, prune
from .model import Instance, Solution, completion_time

DEFAULT_BUDGET_NODES = 10**7
DEFAULT_BUDGET_SECS = 60.0
BRUTE_FORCE_CAP = 10**7
ROOT_PRICE_STEPS = 3000
GREEDY_TRIES = 32
CHUNK_NODES = 20_000
# large-neighbourhood search on the start incumbent
LNS_ROUNDS = 400
LNS_STALE = 150
LNS_FREE = 12
LNS_NODES = 3000
MEMO_SLOTS = 1 << 20


class OracleRefused(RuntimeError):
    """The search space is larger than the brute-force cap."""


@dataclass(frozen=True)
class TaskOption:
    task_id: str
    ap_id: str
    server_id: str
    m: int
    n: int
    profit: float


@dataclass
class SearchStats:
    nodes: int = 0
    bound_trace: list[tuple[int, float]] = field(default_factory=list)
    wall_time: float = 0.0
    proven_optimal: bool = False
    root_bound: float | None = None


@dataclass(frozen=True)
class Selection:
    """At most one chosen option per task, with its total profit."""

    options: tuple[TaskOption, ...]
    profit: float


def _feasible(task, j, k, m, n, cfg, topology, tol):
    t = completion_time(task, j, k, m * cfg.b_unit, n * cfg.c_unit, topology)
    return t <= task.deadline * (1 + tol)


def enumerate_options(instance: Instance, cfg: DiscretizationConfig, dominance: bool = True,
                      tol: float = 1e-9) -> list[list[TaskOption]]:
    """Deadline-feasible ``(j, k, m, n)`` choices per task, in task order.

    With ``dominance`` only the Pareto-minimal ``(m, n)`` per access
    point/server pair are kept.
    """
    u = {a.id: cfg.ap_units(a.bandwidth_capacity) for a in instance.aps}
    v = {s.id: cfg.server_units(s.compute_capacity) for s in instance.servers}
    topo = instance.topology
    out = []
    for task in instance.tasks:
        opts = []
        for j in task.reachable_aps:
            for server in instance.servers:
                k = server.id
                if not u[j] or not v[k]:
                    continue
                best_n = math.inf
                for m in range(1, u[j] + 1):
                    # smallest n meeting the deadline for this m; time falls as n grows
                    budget = task.deadline * (1 + tol) - 2 * topo[(j, k)] - task.size / (m * cfg.b_unit)
                    if budget <= 0:
                        continue
                    n = max(1, math.ceil(task.cycles / (cfg.c_unit * budget)))
                    while n > 1 and _feasible(task, j, k, m, n - 1, cfg, topo, tol):
                        n -= 1
                    while n <= v[k] and not _feasible(task, j, k, m, n, cfg, topo, tol):
                        n += 1
                    if n > v[k]:
                        continue
                    if dominance:
                        if n < best_n:
                            opts.append(TaskOption(task.id, j, k, m, n, task.profit))
                            best_n = n
                    else:
                        opts += [TaskOption(task.id, j, k, m, nn, task.profit)
                                 for nn in range(n, v[k] + 1)]
        out.append(opts)
    return out


def capacities(instance: Instance, cfg: DiscretizationConfig):
    """Unit budgets per access point and per server."""
    return ({a.id: cfg.ap_units(a.bandwidth_capacity) for a in instance.aps},
            {s.id: cfg.server_units(s.compute_capacity) for s in instance.servers})


def _flatten(order, resources):
    counts = [len(opts) for opts in order]
    flat = [o for opts in order for o in opts]
    off = np.zeros(len(order) + 1, dtype=np.int64)
    off[1:] = np.cumsum(counts)
    ra = np.array([resources[o.ap_id] for o in flat], dtype=np.int64)
    rs = np.array([resources[o.server_id] for o in flat], dtype=np.int64)
    mm = np.array([o.m for o in flat], dtype=float)
    nn = np.array([o.n for o in flat], dtype=float)
    prof = np.array([o.profit for o in flat], dtype=float)
    return flat, off, ra, rs, mm, nn, prof


def _seed(hint, flat, off, ra, rs, mm, nn, residual):
    where = {(o.task_id, o.ap_id, o.server_id, o.m, o.n): i for i, o in enumerate(flat)}
    seeded = np.full(len(off) - 1, -1, dtype=np.int64)
    used = np.zeros_like(residual)
    for o in hint:
        c = where.get((o.task_id, o.ap_id, o.server_id, o.m, o.n))
        t = -1 if c is None else int(np.searchsorted(off, c, side="right")) - 1
        if c is None or seeded[t] >= 0:
            raise ValueError(f"hint option {o} is not a candidate or repeats a task")
        seeded[t] = c
        used[ra[c]] += mm[c]
        used[rs[c]] += nn[c]
    if np.any(used > residual):
        raise ValueError("hint exceeds a capacity")
    return seeded


def _neighbourhood_search(order, ap_capacity, server_capacity, current, target, rounds,
                          deadline):
    """Re-solve random groups of tasks exactly while the rest keep their options.

    A group is up to ``LNS_FREE`` tasks with an option on one randomly drawn
    access point or server, topped up with random tasks. ``current`` holds
    one option or ``None`` per task of ``order`` and is improved in place.
    """
    rng = np.random.default_rng(0)
    caps = {**ap_capacity, **server_capacity}
    touching = {r: [i for i, opts in enumerate(order)
                    if any(o.ap_id == r or o.server_id == r for o in opts)] for r in caps}
    touching = [ids for ids in touching.values() if ids]
    total = math.fsum(o.profit for o in current if o is not None)
    stale = 0
    for _ in range(rounds):
        if total >= target or stale >= LNS_STALE or time.perf_counter() > deadline:
            break
        stale += 1
        ids = touching[rng.integers(len(touching))]
        group = set(rng.permutation(ids)[:LNS_FREE].tolist())
        while len(group) < LNS_FREE:
            group.add(int(rng.integers(len(order))))
        left = dict(caps)
        for i, o in enumerate(current):
            if o is not None and i not in group:
                left[o.ap_id] -= o.m
                left[o.server_id] -= o.n
        group = sorted(group)
        before = math.fsum(current[i].profit for i in group if current[i] is not None)
        sel, _ = branch_and_bound([order[i] for i in group],
                                  {j: left[j] for j in ap_capacity},
                                  {k: left[k] for k in server_capacity},
                                  LNS_NODES, None, lns_rounds=0,
                                  hint=[current[i] for i in group if current[i] is not None])
        if sel.profit > before:
            picked = {o.task_id: o for o in sel.options}
            for i in group:
                current[i] = picked.get(order[i][0].task_id)
            total += sel.profit - before
            stale = 0


def _memo_table(residual, n_tasks, budget_nodes):
    # (keys, profits, key buffer, bits per residual row); zero slots disable it
    slots = MEMO_SLOTS if budget_nodes is None else min(MEMO_SLOTS, max(budget_nodes, 1))
    slots = 1 << (slots - 1).bit_length()
    bits = max(int(x).bit_length() for x in residual) or 1
    if budget_nodes == 0 or bits > 31 or not all(float(x).is_integer() for x in residual):
        slots, bits = 0, 1
    words = -(-n_tasks // 62) + -(-len(residual) // (62 // bits))
    return (np.zeros((slots, words), dtype=np.int64), np.full(slots, -np.inf),
            np.zeros(words, dtype=np.int64), bits)


def branch_and_bound(options: Sequence[Sequence[TaskOption]], ap_capacity: Mapping[str, int],
                     server_capacity: Mapping[str, int],
                     budget_nodes: int | None = DEFAULT_BUDGET_NODES,
                     budget_secs: float | None = DEFAULT_BUDGET_SECS,
                     bound: str = "lagrangian", steps: int = 5,
                     hint: Sequence[TaskOption] = (),
                     lns_rounds: int = LNS_ROUNDS) -> tuple[Selection, SearchStats]:
    """Depth-first search over per-task choices (one fitting option, or none).

    ``bound="trivial"`` is the plain scheme: tasks in non-increasing profit
    order, options cheapest first, and a node is cut when its profit plus
    the profit of every undecided task cannot beat the incumbent.

    ``bound="lagrangian"`` prices every access point and server unit: the
    undecided tasks can earn at most ``price @ residual`` plus, per task, its
    best non-negative reduced profit over the options that still fit. Root
    prices come from a subgradient walk and are refined for ``steps`` steps
    at every node. The same prices drive a greedy start incumbent, the choice
    of the next task (fewest surviving branches first) and the option order.
    Before the tree search, ``lns_rounds`` rounds of large-neighbourhood
    search re-solve groups of tasks around the incumbent, and during it a
    table of (undecided tasks, residual units, profit) states cuts subtrees
    that were already searched from an equal or better position. ``hint``
    is a feasible selection to start from.

    When all profits are integers a node only survives if it can gain at
    least one unit. When a budget runs out the incumbent comes back with
    ``proven_optimal=False``.
    """
    if bound not in ("lagrangian", "trivial"):
        raise ValueError(f"unknown bound {bound!r}")
    priced = bound == "lagrangian"
    start = time.perf_counter()
    stats = SearchStats()
    order = sorted((opts for opts in options if opts),
                   key=lambda opts: (-opts[0].profit, opts[0].task_id))
    order = [sorted(opts, key=lambda o: (o.m / max(ap_capacity[o.ap_id], 1)
                                         + o.n / max(server_capacity[o.server_id], 1)))
             for opts in order]
    if not order:
        stats.proven_optimal = True
        stats.wall_time = time.perf_counter() - start
        return Selection((), 0.0), stats

    resources = {j: r for r, j in enumerate(ap_capacity)}
    resources.update({k: len(ap_capacity) + r for r, k in enumerate(server_capacity)})
    residual = np.array([*ap_capacity.values(), *server_capacity.values()], dtype=float)
    flat, off, ra, rs, mm, nn, prof = _flatten(order, resources)
    n_tasks = len(order)
    tprof = prof[off[:-1]].copy()
    if all(float(p).is_integer() for p in tprof):
        gap = 1.0 - 1e-6
    else:
        gap = 1e-9 * max(1.0, float(tprof.sum()))

    price = np.zeros((n_tasks + 1, len(residual)))
    best_assign = np.full(n_tasks, -1, dtype=np.int64)
    incumbent = 0.0
    if priced:
        stats.root_bound, price[0] = _kernels.root_prices(off, ra, rs, mm, nn, prof, residual,
                                                          ROOT_PRICE_STEPS)
        rng = np.random.default_rng(0)
        tries = [np.arange(n_tasks)] + [rng.permutation(n_tasks) for _ in range(GREEDY_TRIES)]
        for prices in (price[0], np.zeros(len(residual))):
            for visit in tries:
                total, choice = _kernels.greedy_fill(off, ra, rs, mm, nn, prof, residual,
                                                     prices, visit)
                if total > incumbent:
                    incumbent, best_assign = total, choice
    if hint:
        seeded = _seed(hint, flat, off, ra, rs, mm, nn, residual)
        total = math.fsum(o.profit for o in hint)
        if total > incumbent:
            incumbent, best_assign = total, seeded
    if priced and lns_rounds > 0 and n_tasks > LNS_FREE:
        current = [flat[c] if c >= 0 else None for c in best_assign]
        deadline = math.inf if budget_secs is None else start + budget_secs / 4
        _neighbourhood_search(order, ap_capacity, server_capacity, current,
                              stats.root_bound - gap, lns_rounds, deadline)
        total = math.fsum(o.profit for o in current if o is not None)
        if total > incumbent:
            incumbent = total
            best_assign = _seed([o for o in current if o is not None],
                                flat, off, ra, rs, mm, nn, residual)
    if incumbent > 0:
        stats.bound_trace.append((0, incumbent))

    width = int(np.max(np.diff(off))) + 1
    state = dict(
        free=np.ones(n_tasks, dtype=np.bool_),
        cand=np.zeros((n_tasks, width), dtype=np.int64),
        ncand=np.zeros(n_tasks, dtype=np.int64),
        pos=np.zeros(n_tasks, dtype=np.int64),
        task_at=np.full(n_tasks, -1, dtype=np.int64),
        chosen=np.full(n_tasks, -1, dtype=np.int64),
        assign=np.full(n_tasks, -1, dtype=np.int64),
        best_red=np.zeros(n_tasks),
        keys=np.zeros(width),
    )
    memo = _memo_table(residual, n_tasks, budget_nodes if priced else 0)
    ictl = np.array([0, 1, 0], dtype=np.int64)
    fctl = np.array([0.0, float(tprof.sum()), incumbent])

    while True:
        chunk = CHUNK_NODES
        if budget_nodes is not None:
            chunk = min(chunk, budget_nodes - int(ictl[2]))
            if chunk <= 0:
                break
        status = _kernels.run_search(
            off, ra, rs, mm, nn, prof, residual, tprof, price, state["free"], state["cand"],
            state["ncand"], state["pos"], state["task_at"], state["chosen"], state["assign"],
            best_assign, state["best_red"], state["keys"], ictl, fctl, chunk, steps, gap, priced,
            *memo)
        if status == _kernels.IMPROVED:
            stats.bound_trace.append((int(ictl[2]), float(fctl[2])))
        elif status == _kernels.FINISHED:
            stats.proven_optimal = True
            break
        if budget_secs is not None and time.perf_counter() - start > budget_secs:
            break

    stats.nodes = int(ictl[2])
    stats.wall_time = time.perf_counter() - start
    chosen = tuple(sorted((flat[c] for c in best_assign if c >= 0), key=lambda o: o.task_id))
    return Selection(chosen, math.fsum(o.profit for o in chosen)), stats


def brute_force(options: Sequence[Sequence[TaskOption]], ap_capacity: Mapping[str, float],
                server_capacity: Mapping[str, float], cap: int = BRUTE_FORCE_CAP,
                tol: float = 1e-9) -> Selection:
    """Exhaustive enumeration of every feasible combination of per-task choices.

    Only capacity feasibility cuts the enumeration; there is no bounding.
    Unit counts may be fractional, with a relative tolerance on capacity.
    """
    size = math.prod(len(opts) + 1 for opts in options)
    if size > cap:
        raise OracleRefused(f"search space {size} exceeds cap {cap}")
    ru = dict(ap_capacity)
    rv = dict(server_capacity)
    slack_b = {j: tol * max(1.0, c) for j, c in ap_capacity.items()}
    slack_c = {k: tol * max(1.0, c) for k, c in server_capacity.items()}
    stack: list[TaskOption] = []
    best = [0.0, ()]

    def walk(d, profit):
        if d == len(options):
            if profit > best[0]:
                best[0], best[1] = profit, tuple(stack)
            return
        walk(d + 1, profit)
        for o in options[d]:
            if o.m <= ru[o.ap_id] + slack_b[o.ap_id] and o.n <= rv[o.server_id] + slack_c[o.server_id]:
                ru[o.ap_id] -= o.m
                rv[o.server_id] -= o.n
                stack.append(o)
                walk(d + 1, profit + o.profit)
                stack.pop()
                ru[o.ap_id] += o.m
                rv[o.server_id] += o.n

    walk(0, 0.0)
    return Selection(tuple(sorted(best[1], key=lambda o: o.task_id)), best[0])


def selection_to_valuation(model: IlpModel, selection: Selection) -> dict[str, int]:
    valuation = {}
    for o in selection.options:
        valuation[model.x_name(o.task_id, o.ap_id, o.m)] = 1
        valuation[model.y_name(o.task_id, o.server_id, o.n)] = 1
        valuation[model.z_name(o.task_id, o.ap_id, o.server_id)] = 1
    return valuation


def solve_ldm(instance: Instance, cfg: DiscretizationConfig, *, use_prune: bool = True,
              dominance: bool = True, budget_nodes: int | None = DEFAULT_BUDGET_NODES,
              budget_secs: float | None = DEFAULT_BUDGET_SECS,
              bound: str = "lagrangian") -> tuple[Solution, SearchStats]:
    """Optimal discretized allocation, cross-checked against the 0-1 model.

    The branch-and-bound selection is written back as a 0-1 valuation of the
    (optionally pruned) model; every row must hold before grants are extracted.
    """
    model = discretize(instance, cfg)
    if use_prune:
        model = prune(model, instance, cfg)
    u, v = capacities(instance, cfg)
    selection, stats = branch_and_bound(enumerate_options(instance, cfg, dominance), u, v,
                                        budget_nodes, budget_secs, bound)
    valuation = selection_to_valuation(model, selection)
    bad = model.violated(valuation)
    if bad:
        raise ConsistencyError(f"selection breaks model rows: {', '.join(bad[:5])}")
    return extract_solution(instance, cfg, model, valuation), stats


def solve_brute(instance: Instance, cfg: DiscretizationConfig, cap: int = BRUTE_FORCE_CAP) -> Solution:
    model = discretize(instance, cfg)
    u, v = capacities(instance, cfg)
    selection = brute_force(enumerate_options(instance, cfg), u, v, cap)
    return extract_solution(instance, cfg, model, selection_to_valuation(model, selection))
