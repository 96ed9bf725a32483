"""Synthetic edge-cloud architectures and tasksets.

Architecture: integer AP bandwidths, edge/cloud server capacities and
backhaul delays drawn uniformly from fixed ranges; edge server ``n`` sits at
access point ``n`` (zero delay). Tasksets: per-AP bandwidth utilizations
from Uunifast, system compute utilizations from Stafford's Randfixedsum, and
data sizes / cycle counts derived from them over the window
``tau_i = deadline_i - 2 * mean delay``.

Randomness comes from numpy's PCG64 bit generator (``numpy.random.default_rng``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .model import CLOUD, EDGE, AccessPoint, Instance, Server, Task, Topology


@dataclass(frozen=True)
class ArchitectureConfig:
    n_aps: int = 20
    n_edge_servers: int = 20
    n_cloud_servers: int = 5
    cloud_compute: tuple[int, int] = (80, 100)
    edge_compute: tuple[int, int] = (40, 60)
    ap_bandwidth: tuple[int, int] = (40, 100)
    delay: tuple[int, int] = (0, 10)

    def __post_init__(self):
        for name in ("cloud_compute", "edge_compute", "ap_bandwidth", "delay"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: empty range {lo}..{hi}")
        if self.n_edge_servers > self.n_aps:
            raise ValueError("each edge server needs its own access point")
        if self.n_aps < 1 or self.n_edge_servers + self.n_cloud_servers < 1:
            raise ValueError("need at least one access point and one server")
        if self.ap_bandwidth[0] <= 0 or self.edge_compute[0] <= 0 or self.cloud_compute[0] <= 0:
            raise ValueError("capacities must be positive")


SMALL_ARCHITECTURE = ArchitectureConfig(n_aps=4, n_edge_servers=4, n_cloud_servers=1)


@dataclass(frozen=True)
class TasksetGenConfig:
    n_tasks: int
    ub: float
    uc: float
    aps_per_task: tuple[int, int] = (1, 2)
    profit: tuple[int, int] = (10, 100)
    deadline_offset: tuple[int, int] = (15, 45)
    seed: int | None = None

    def __post_init__(self):
        if self.n_tasks < 1:
            raise ValueError("n_tasks must be positive")
        if not 0 < self.ub <= 1:
            raise ValueError(f"ub must be in (0, 1], got {self.ub}")
        if not 0 < self.uc <= self.n_tasks:
            raise ValueError(f"uc must be in (0, n_tasks], got {self.uc}")
        if self.deadline_offset[0] <= 0:
            raise ValueError("deadline offsets must be positive")


@dataclass(frozen=True)
class UtilizationProfile:
    bandwidth: dict[tuple[str, str], float] = field(default_factory=dict)  # (ap, task) -> ub_ji
    compute: dict[str, float] = field(default_factory=dict)
    window: dict[str, float] = field(default_factory=dict)
    delay_mean: float = 0.0
    delay_max: float = 0.0


class Architecture(NamedTuple):
    aps: tuple[AccessPoint, ...]
    servers: tuple[Server, ...]
    topology: Topology


def _rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def _ids(prefix: str, n: int) -> list[str]:
    width = len(str(max(n - 1, 0)))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def sample_architecture(cfg: ArchitectureConfig = ArchitectureConfig(), rng=None) -> Architecture:
    """Draw capacities and delays; edge server ``e`` is colocated with AP ``e``.

    Non-colocated delays are drawn from the delay range with 0 excluded, so
    zero delay marks colocation and nothing else.
    """
    rng = _rng(rng)
    ap_ids = _ids("a", cfg.n_aps)
    aps = tuple(AccessPoint(j, int(rng.integers(cfg.ap_bandwidth[0], cfg.ap_bandwidth[1],
                                                  endpoint=True)))
                for j in ap_ids)
    servers = []
    for e in range(cfg.n_edge_servers):
        cap = int(rng.integers(cfg.edge_compute[0], cfg.edge_compute[1], endpoint=True))
        servers.append(Server(f"e{ap_ids[e][1:]}", cap, EDGE, ap_ids[e]))
    for k in _ids("c", cfg.n_cloud_servers):
        cap = int(rng.integers(cfg.cloud_compute[0], cfg.cloud_compute[1], endpoint=True))
        servers.append(Server(k, cap, CLOUD))
    lo = max(cfg.delay[0], 1)
    delay = {}
    for j in ap_ids:
        for s in servers:
            if s.colocated_ap == j:
                delay[(j, s.id)] = 0
            else:
                delay[(j, s.id)] = int(rng.integers(lo, cfg.delay[1], endpoint=True))
    return Architecture(aps, tuple(servers), Topology(delay))


def uunifast(n: int, total: float, rng=None) -> np.ndarray:
    """``n`` positive utilizations summing to ``total``, uniform over the simplex."""
    rng = _rng(rng)
    if n < 1:
        raise ValueError("n must be positive")
    out = np.empty(n)
    remaining = total
    for i in range(1, n):
        nxt = remaining * rng.random() ** (1.0 / (n - i))
        out[i - 1] = remaining - nxt
        remaining = nxt
    out[n - 1] = remaining
    return out


def randfixedsum(n: int, total: float, max_per: float = 1.0, rng=None) -> np.ndarray:
    """``n`` values in ``[0, max_per]`` summing to ``total``, uniform on that slice.

    Stafford's construction: the slice of the cube is cut into simplices,
    one is picked with probability proportional to its volume, and a point
    is drawn uniformly inside it; the coordinates are then shuffled.
    """
    rng = _rng(rng)
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 < total <= n * max_per * (1 + 1e-12):
        raise ValueError(f"total {total} outside (0, {n * max_per}]")
    if total >= n * max_per:
        return np.full(n, float(max_per))

    s = total / max_per
    k = max(min(math.floor(s), n - 1), 0)
    s = max(min(s, k + 1), k)
    s1 = s - np.arange(k, k - n, -1, dtype=float)
    s2 = np.arange(k + n, k, -1, dtype=float) - s

    huge = np.finfo(float).max
    tiny = np.finfo(float).tiny
    w = np.zeros((n, n + 1))
    w[0, 1] = huge
    t = np.zeros((max(n - 1, 1), n))
    for i in range(2, n + 1):
        tmp1 = w[i - 2, 1:i + 1] * s1[:i] / i
        tmp2 = w[i - 2, 0:i] * s2[n - i:n] / i
        w[i - 1, 1:i + 1] = tmp1 + tmp2
        tmp3 = w[i - 1, 1:i + 1] + tiny
        up = s2[n - i:n] > s1[:i]
        t[i - 2, :i] = np.where(up, tmp2 / tmp3, 1 - tmp1 / tmp3)

    x = np.zeros(n)
    rt = rng.random(n - 1)
    rs = rng.random(n - 1)
    j = k + 1
    sm, pr = 0.0, 1.0
    for i in range(n - 1, 0, -1):
        e = 1 if rt[n - i - 1] <= t[i - 1, j - 1] else 0
        sx = rs[n - i - 1] ** (1.0 / i)
        sm += (1 - sx) * pr * s / (i + 1)
        pr *= sx
        x[n - i - 1] = sm + pr * e
        s -= e
        j -= e
    x[n - 1] = sm + pr * s
    x = x[rng.permutation(n)]
    return np.clip(x * max_per, 0.0, max_per)


def delay_stats(arch: Architecture) -> tuple[float, float]:
    """Mean and max backhaul delay over all pairs, colocated zeros included."""
    values = list(arch.topology.delay.values())
    return float(np.mean(values)), float(max(values))


def generate_with_profile(arch: Architecture, cfg: TasksetGenConfig,
                          rng=None) -> tuple[Instance, UtilizationProfile]:
    rng = _rng(cfg.seed if rng is None else rng)
    d_mean, d_max = delay_stats(arch)
    ap_ids = [a.id for a in arch.aps]
    task_ids = _ids("t", cfg.n_tasks)
    hi_aps = min(cfg.aps_per_task[1], len(ap_ids))
    lo_aps = min(cfg.aps_per_task[0], hi_aps)

    drafts = []
    for i in task_ids:
        profit = int(rng.integers(cfg.profit[0], cfg.profit[1], endpoint=True))
        count = int(rng.integers(lo_aps, hi_aps, endpoint=True))
        picks = sorted(int(x) for x in rng.choice(len(ap_ids), size=count, replace=False))
        base = 2 * (d_max if rng.random() < 0.5 else d_mean)
        deadline = int(rng.integers(math.ceil(base + cfg.deadline_offset[0]),
                                    math.floor(base + cfg.deadline_offset[1]), endpoint=True))
        drafts.append((i, profit, tuple(ap_ids[p] for p in picks), deadline))

    window = {i: deadline - 2 * d_mean for i, _, _, deadline in drafts}
    bandwidth = {}
    for j in ap_ids:
        covered = [i for i, _, aps, _ in drafts if j in aps]
        if covered:
            for i, ub in zip(covered, uunifast(len(covered), cfg.ub, rng)):
                bandwidth[(j, i)] = float(ub)
    compute = dict(zip(task_ids, (float(x) for x in randfixedsum(cfg.n_tasks, cfg.uc, 1.0, rng))))

    cap_b = {a.id: a.bandwidth_capacity for a in arch.aps}
    min_c = min(s.compute_capacity for s in arch.servers)
    tasks = []
    for i, profit, aps, deadline in drafts:
        size = max(bandwidth[(j, i)] * cap_b[j] * window[i] for j in aps)
        cycles = compute[i] * min_c * window[i]
        tasks.append(Task(i, size, cycles, deadline, profit, aps))
    # zero utilizations are measure-zero draws but would break positivity
    tasks = [t for t in tasks if t.size > 0 and t.cycles > 0]
    instance = Instance(tuple(tasks), arch.aps, arch.servers, arch.topology)
    return instance, UtilizationProfile(bandwidth, compute, window, d_mean, d_max)


def generate_taskset(arch: Architecture, cfg: TasksetGenConfig, rng=None) -> Instance:
    return generate_with_profile(arch, cfg, rng)[0]
