from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import random_instance, single_pair
from edgealloc import solver
from edgealloc.ldm import DiscretizationConfig
from edgealloc.model import AccessPoint, Instance, Server, Task, Topology
from edgealloc.solver import (OracleRefused, TaskOption, branch_and_bound, brute_force, capacities,
                              enumerate_options, solve_ldm)
from edgealloc.verify import verify

UNIT5 = DiscretizationConfig(5, 5)
UNIT1 = DiscretizationConfig(1, 1)


def test_enumerate_spec_example():
    inst = single_pair([(10, 10, 6, 7)], bandwidth=10, compute=10)
    [opts] = enumerate_options(inst, UNIT5)
    assert [(o.m, o.n) for o in opts] == [(1, 1)]
    [every] = enumerate_options(inst, UNIT5, dominance=False)
    assert sorted((o.m, o.n) for o in every) == [(1, 1), (1, 2), (2, 1), (2, 2)]


def test_enumerate_pareto_front():
    # time = 10/(5m) + 10/(5n) <= 3 needs m, n >= 1 with 2/m + 2/n <= 3
    inst = single_pair([(10, 10, 3, 7)], bandwidth=20, compute=20)
    [opts] = enumerate_options(inst, UNIT5)
    assert [(o.m, o.n) for o in opts] == [(1, 2), (2, 1)]


def test_enumerate_unreachable_deadline():
    inst = single_pair([(1, 1, 1.9, 7)], bandwidth=10, compute=10, colocated=False, delay=1)
    assert enumerate_options(inst, UNIT5) == [[]]


def test_dominance_is_per_pair():
    aps = (AccessPoint("a0", 10),)
    servers = (Server("e0", 10, "edge", "a0"), Server("c0", 10, "cloud"))
    inst = Instance((Task("t0", 10, 10, 8, 7, ("a0",)),), aps, servers,
                    Topology({("a0", "e0"): 0, ("a0", "c0"): 1}))
    [opts] = enumerate_options(inst, UNIT5)
    assert Counter(o.server_id for o in opts) == {"e0": 1, "c0": 1}


def test_disjoint_tasks_all_fit():
    aps = tuple(AccessPoint(f"a{j}", 10) for j in range(3))
    servers = tuple(Server(f"e{j}", 10, "edge", f"a{j}") for j in range(3))
    delay = {(f"a{j}", f"e{k}"): (0 if j == k else 9) for j in range(3) for k in range(3)}
    tasks = tuple(Task(f"t{j}", 10, 10, 6, 10 * (j + 1), (f"a{j}",)) for j in range(3))
    inst = Instance(tasks, aps, servers, Topology(delay))
    sel, stats = branch_and_bound(enumerate_options(inst, UNIT5), *capacities(inst, UNIT5))
    assert sel.profit == 60 and stats.proven_optimal


@pytest.mark.parametrize("bound", ["lagrangian", "trivial"])
def test_higher_profit_wins(bound):
    opts = [[TaskOption("t0", "a0", "s0", 1, 1, 10)], [TaskOption("t1", "a0", "s0", 1, 1, 40)]]
    sel, stats = branch_and_bound(opts, {"a0": 1}, {"s0": 5}, bound=bound)
    assert sel.profit == 40 and [o.task_id for o in sel.options] == ["t1"]
    assert stats.proven_optimal
    assert brute_force(opts, {"a0": 1}, {"s0": 5}).profit == 40


def test_empty_inputs():
    sel, stats = branch_and_bound([], {}, {})
    assert sel.profit == 0 and stats.proven_optimal
    assert brute_force([], {}, {}).profit == 0


def test_single_option_respects_capacity():
    opt = [[TaskOption("t0", "a0", "s0", 2, 1, 9)]]
    assert brute_force(opt, {"a0": 2}, {"s0": 1}).profit == 9
    assert brute_force(opt, {"a0": 1}, {"s0": 1}).profit == 0


def test_brute_force_refuses_large_spaces():
    opts = [[TaskOption(f"t{i}", "a0", "s0", 1, 1, 1)] * 9 for i in range(8)]
    with pytest.raises(OracleRefused):
        brute_force(opts, {"a0": 4}, {"s0": 4})


def test_bnb_rejects_unknown_bound():
    with pytest.raises(ValueError):
        branch_and_bound([], {}, {}, bound="lp")


def test_budget_exhaustion_keeps_feasible_incumbent():
    rng = np.random.default_rng(5)
    inst = random_instance(rng, max_tasks=6, unit=1.0)
    while len(inst.tasks) < 5:
        inst = random_instance(rng, max_tasks=6, unit=1.0)
    u, v = capacities(inst, UNIT1)
    sel, stats = branch_and_bound(enumerate_options(inst, UNIT1), u, v, budget_nodes=1,
                                  bound="trivial")
    assert not stats.proven_optimal and stats.nodes == 1
    _check_capacity(sel, u, v)


def _check_capacity(sel, u, v):
    assert len({o.task_id for o in sel.options}) == len(sel.options)
    for j, cap in u.items():
        assert sum(o.m for o in sel.options if o.ap_id == j) <= cap
    for k, cap in v.items():
        assert sum(o.n for o in sel.options if o.server_id == k) <= cap


def _oracle_case(seed, integer_profit=True):
    inst = random_instance(np.random.default_rng(seed), integer_profit=integer_profit)
    return inst, enumerate_options(inst, UNIT1), *capacities(inst, UNIT1)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["lagrangian", "trivial"]), st.booleans())
def test_bnb_matches_brute_force(seed, bound, integer_profit):
    inst, opts, u, v = _oracle_case(seed, integer_profit)
    expected = brute_force(opts, u, v)
    sel, stats = branch_and_bound(opts, u, v, bound=bound)
    assert stats.proven_optimal
    assert sel.profit == pytest.approx(expected.profit, rel=1e-12)
    _check_capacity(sel, u, v)
    traced = [p for _, p in stats.bound_trace]
    assert traced == sorted(traced)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dominance_keeps_optimum(seed):
    inst = random_instance(np.random.default_rng(seed))
    u, v = capacities(inst, UNIT1)
    # without dominance the lists are too long to enumerate, so the exact search stands in
    full, stats = branch_and_bound(enumerate_options(inst, UNIT1, dominance=False), u, v)
    assert stats.proven_optimal
    assert brute_force(enumerate_options(inst, UNIT1), u, v).profit == full.profit


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_options_meet_deadline(seed):
    inst = random_instance(np.random.default_rng(seed), unit=5.0)
    u, v = capacities(inst, UNIT5)
    for opts in enumerate_options(inst, UNIT5, dominance=False):
        for o in opts:
            assert 1 <= o.m <= u[o.ap_id] and 1 <= o.n <= v[o.server_id]
            t = inst.task(o.task_id)
            time = t.size / (o.m * 5) + 2 * inst.delay(o.ap_id, o.server_id) + t.cycles / (o.n * 5)
            assert time <= t.deadline * (1 + 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_solve_ldm_verifies(seed):
    inst = random_instance(np.random.default_rng(seed), max_tasks=8, unit=5.0)
    sol, stats = solve_ldm(inst, UNIT5)
    assert stats.proven_optimal and verify(inst, sol).feasible
    assert sol.profit == solve_ldm(inst, UNIT5, bound="trivial")[0].profit


def _mid_case(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, max_tasks=18, max_units=8)
    while len(inst.tasks) <= 13:
        inst = random_instance(rng, max_tasks=18, max_units=8)
    return enumerate_options(inst, UNIT1), *capacities(inst, UNIT1)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_search_variants_agree_beyond_oracle_size(seed):
    opts, u, v = _mid_case(seed)
    plain, s1 = branch_and_bound(opts, u, v, bound="trivial")
    full, s2 = branch_and_bound(opts, u, v)
    no_lns, s3 = branch_and_bound(opts, u, v, lns_rounds=0)
    slots, solver.MEMO_SLOTS = solver.MEMO_SLOTS, 1
    try:
        tiny_memo, s4 = branch_and_bound(opts, u, v)
    finally:
        solver.MEMO_SLOTS = slots
    assert s1.proven_optimal and s2.proven_optimal and s3.proven_optimal and s4.proven_optimal
    assert plain.profit == full.profit == no_lns.profit == tiny_memo.profit
    _check_capacity(full, u, v)


def test_hint_becomes_incumbent():
    opts, u, v = _mid_case(11)
    best, _ = branch_and_bound(opts, u, v)
    sel, stats = branch_and_bound(opts, u, v, budget_nodes=1, lns_rounds=0, hint=best.options)
    assert sel.profit == best.profit and stats.bound_trace[0] == (0, best.profit)


def test_hint_is_checked():
    opts, u, v = _mid_case(11)
    foreign = TaskOption("nope", "a0", "c0", 1, 1, 1.0)
    with pytest.raises(ValueError, match="candidate"):
        branch_and_bound(opts, u, v, hint=[foreign])
    heavy = [max(task, key=lambda o: o.m + o.n) for task in opts]
    with pytest.raises(ValueError, match="capacity"):
        branch_and_bound(opts, u, v, hint=heavy)
