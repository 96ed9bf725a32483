"""Compiled inner loops of the exact option-set search.

Options are stored flat: task ``t`` owns the slice ``off[t]:off[t + 1]`` of
the per-option arrays (resource row of its access point ``ra`` and of its
server ``rs``, units ``mm`` / ``nn`` and profit ``prof``). Resource rows are
access points first, then servers; ``resid`` holds their residual units.

The search is resumable: all of its state lives in :class:`numpy` arrays that
the caller keeps between calls, so a Python driver can enforce wall-clock
budgets and record incumbents in between.
"""

from __future__ import annotations

import numpy as np
from numba import njit

FINISHED = 0
PAUSED = 1
IMPROVED = 2

# int control slots
_DEPTH, _ENTERING, _NODES = 0, 1, 2
# float control slots
_PROFIT, _REMAINING, _BEST = 0, 1, 2


@njit(cache=True)
def priced_value(off, ra, rs, mm, nn, prof, resid, price, free, use, best_red):
    """Lagrangian bound of the free tasks under ``price``.

    Every free task takes its option of largest reduced profit (or nothing);
    ``use`` receives the resulting resource usage and ``best_red`` each
    task's best non-negative reduced profit.
    """
    value = 0.0
    for r in range(resid.shape[0]):
        value += price[r] * resid[r]
        use[r] = 0.0
    for t in range(off.shape[0] - 1):
        if not free[t]:
            continue
        top = 0.0
        arg = -1
        for o in range(off[t], off[t + 1]):
            if mm[o] <= resid[ra[o]] and nn[o] <= resid[rs[o]]:
                red = prof[o] - price[ra[o]] * mm[o] - price[rs[o]] * nn[o]
                if red > top:
                    top = red
                    arg = o
        best_red[t] = top
        if arg >= 0:
            value += top
            use[ra[arg]] += mm[arg]
            use[rs[arg]] += nn[arg]
    return value


@njit(cache=True)
def root_prices(off, ra, rs, mm, nn, prof, resid, iters):
    """Minimize the Lagrangian bound of the whole problem over prices.

    Normalized subgradient steps with a decaying length; every 500 steps the
    walk restarts from the best prices seen with half the step length.
    """
    n_res = resid.shape[0]
    free = np.ones(off.shape[0] - 1, np.bool_)
    use = np.empty(n_res)
    best_red = np.empty(off.shape[0] - 1)
    cur = np.zeros(n_res)
    price = np.zeros(n_res)
    best = np.inf
    length = 0.0
    for o in range(prof.shape[0]):
        length = max(length, prof[o])
    length /= 4.0
    for it in range(iters):
        v = priced_value(off, ra, rs, mm, nn, prof, resid, cur, free, use, best_red)
        if v < best:
            best = v
            price[:] = cur
        norm = 0.0
        for r in range(n_res):
            g = resid[r] - use[r]
            norm += g * g
        if norm == 0.0:
            break
        step = length / np.sqrt(norm) / np.sqrt(1.0 + it % 500)
        for r in range(n_res):
            x = cur[r] - step * (resid[r] - use[r])
            cur[r] = x if x > 0.0 else 0.0
        if it % 500 == 499:
            cur[:] = price
            length *= 0.5
    return best, price


@njit(cache=True)
def greedy_fill(off, ra, rs, mm, nn, prof, resid, price, order):
    """Visit tasks in ``order``; each takes its fitting option of best reduced profit."""
    left = resid.copy()
    choice = np.full(off.shape[0] - 1, -1, np.int64)
    total = 0.0
    for t in order:
        top = -np.inf
        arg = -1
        for o in range(off[t], off[t + 1]):
            if mm[o] <= left[ra[o]] and nn[o] <= left[rs[o]]:
                red = prof[o] - price[ra[o]] * mm[o] - price[rs[o]] * nn[o]
                if red > top:
                    top = red
                    arg = o
        if arg >= 0:
            choice[t] = arg
            left[ra[arg]] -= mm[arg]
            left[rs[arg]] -= nn[arg]
            total += prof[arg]
    return total, choice


@njit(cache=True)
def _node_bound(off, ra, rs, mm, nn, prof, resid, price, free, steps, target, best_red):
    # Polyak steps toward ``target``, warm-started from the parent's prices;
    # ``price`` and ``best_red`` end up at the best prices found
    n_res = resid.shape[0]
    use = np.empty(n_res)
    red = np.empty_like(best_red)
    cur = price.copy()
    best = np.inf
    for it in range(steps + 1):
        v = priced_value(off, ra, rs, mm, nn, prof, resid, cur, free, use, red)
        if v < best:
            best = v
            price[:] = cur
            best_red[:] = red
        if best <= target or it == steps:
            break
        norm = 0.0
        for r in range(n_res):
            g = resid[r] - use[r]
            norm += g * g
        if norm == 0.0:
            break
        step = (v - target) / norm
        for r in range(n_res):
            x = cur[r] - step * (resid[r] - use[r])
            cur[r] = x if x > 0.0 else 0.0
    return best


@njit(cache=True)
def _state_key(free, resid, bits, key):
    # undecided tasks as a bitmask, then residual units packed ``bits`` per row
    for w in range(key.shape[0]):
        key[w] = 0
    for t in range(free.shape[0]):
        if free[t]:
            key[t // 62] |= np.int64(1) << (t % 62)
    base = (free.shape[0] + 61) // 62
    per_word = 62 // bits
    for r in range(resid.shape[0]):
        key[base + r // per_word] |= np.int64(resid[r]) << ((r % per_word) * bits)
    h = np.uint64(0x9E3779B97F4A7C15)
    for w in range(key.shape[0]):
        h ^= np.uint64(key[w])
        h *= np.uint64(0xBF58476D1CE4E5B9)
        h ^= h >> np.uint64(29)
    return h


@njit(cache=True)
def _seen(memo_keys, memo_prof, key, h, profit):
    """True when this state was entered before with at least ``profit``; records it otherwise."""
    slot = np.int64(h & np.uint64(memo_keys.shape[0] - 1))
    same = True
    for w in range(key.shape[0]):
        if memo_keys[slot, w] != key[w]:
            same = False
            break
    if same and memo_prof[slot] >= profit:
        return True
    memo_keys[slot, :] = key
    memo_prof[slot] = profit
    return False


@njit(cache=True)
def run_search(off, ra, rs, mm, nn, prof, resid, tprof, price, free, cand, ncand, pos,
               task_at, chosen, assign, best_assign, best_red, keys, ictl, fctl,
               node_limit, steps, gap, priced, memo_keys, memo_prof, key, bits):
    """Depth-first search from the state in the arrays, for at most ``node_limit`` nodes.

    A node is cut when its profit plus a bound on the free tasks falls short
    of the incumbent by ``gap`` or more (``gap`` is just under 1 when all
    profits are integers). With ``priced`` the bound is the Lagrangian one,
    the next task is the one with fewest surviving branches, options are tried
    in order of reduced profit and options whose priced bound cannot reach the
    incumbent are not branched on. Without it the bound is the free tasks'
    profit sum and tasks and options go in array order.

    With a non-empty ``memo_keys`` table a node is also cut when the same
    undecided tasks and residual units were reached before with at least
    the same profit: that subtree has been searched already.

    Returns FINISHED once the tree is exhausted, PAUSED when the node limit
    is hit and IMPROVED right after a better incumbent is stored.
    """
    n_tasks = off.shape[0] - 1
    d = ictl[_DEPTH]
    entering = ictl[_ENTERING] == 1
    profit = fctl[_PROFIT]
    remaining = fctl[_REMAINING]
    best = fctl[_BEST]
    stop = ictl[_NODES] + node_limit
    status = PAUSED
    while True:
        if entering:
            if ictl[_NODES] >= stop:
                break
            ictl[_NODES] += 1
            cut = d == n_tasks or profit + remaining < best + gap
            if not cut and memo_keys.shape[0] > 0:
                h = _state_key(free, resid, bits, key)
                cut = _seen(memo_keys, memo_prof, key, h, profit)
            bound = 0.0
            if not cut and priced:
                if d > 0:
                    price[d, :] = price[d - 1, :]
                bound = _node_bound(off, ra, rs, mm, nn, prof, resid, price[d], free, steps,
                                    best - profit + gap, best_red)
                cut = profit + bound < best + gap
            if cut:
                entering = False
            else:
                pick = -1
                if priced:
                    fewest = 1 << 60
                    for t in range(n_tasks):
                        if not free[t]:
                            continue
                        room = profit + bound - best - best_red[t]
                        count = 1 if room >= gap else 0
                        for o in range(off[t], off[t + 1]):
                            if mm[o] <= resid[ra[o]] and nn[o] <= resid[rs[o]]:
                                red = prof[o] - price[d, ra[o]] * mm[o] - price[d, rs[o]] * nn[o]
                                if room + red >= gap:
                                    count += 1
                        if count < fewest:
                            fewest = count
                            pick = t
                else:
                    for t in range(n_tasks):
                        if free[t]:
                            pick = t
                            break
                task_at[d] = pick
                room = profit + bound - best - best_red[pick]
                k = 0
                for o in range(off[pick], off[pick + 1]):
                    if mm[o] <= resid[ra[o]] and nn[o] <= resid[rs[o]]:
                        if priced:
                            red = prof[o] - price[d, ra[o]] * mm[o] - price[d, rs[o]] * nn[o]
                            if room + red < gap:
                                continue
                            keys[k] = -red
                        else:
                            keys[k] = k
                        cand[d, k] = o
                        k += 1
                if priced and k > 1:
                    idx = np.argsort(keys[:k], kind="mergesort")
                    head = cand[d, :k].copy()
                    for i in range(k):
                        cand[d, i] = head[idx[i]]
                if not priced or room >= gap:
                    cand[d, k] = -1
                    k += 1
                ncand[d] = k
                pos[d] = 0
                free[pick] = False
                remaining -= tprof[pick]
        if not entering:
            d -= 1
            if d < 0:
                status = FINISHED
                break
            c = chosen[d]
            if c >= 0:
                resid[ra[c]] += mm[c]
                resid[rs[c]] += nn[c]
                profit -= prof[c]
                chosen[d] = -1
                assign[task_at[d]] = -1

        # next branch at depth d
        entering = False
        t = task_at[d]
        while pos[d] < ncand[d]:
            c = cand[d, pos[d]]
            pos[d] += 1
            if c >= 0:
                if profit + tprof[t] + remaining < best + gap:
                    pos[d] = ncand[d]
                    break
                chosen[d] = c
                assign[t] = c
                resid[ra[c]] -= mm[c]
                resid[rs[c]] -= nn[c]
                profit += prof[c]
                d += 1
                entering = True
                break
            if profit + remaining >= best + gap:
                chosen[d] = -1
                d += 1
                entering = True
                break
        if not entering:
            free[t] = True
            remaining += tprof[t]
        elif profit > best:
            best = profit
            best_assign[:] = assign
            status = IMPROVED
            break

    ictl[_DEPTH] = d
    ictl[_ENTERING] = 1 if entering else 0
    fctl[_PROFIT] = profit
    fctl[_REMAINING] = remaining
    fctl[_BEST] = best
    return status
