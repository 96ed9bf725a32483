"""Benchmark campaigns: ZSG against exact LDM solves over generated tasksets.

A campaign samples one architecture, generates one taskset per (size, ub,
uc, seed) cell and runs every requested algorithm on it. Each run becomes a
:class:`RunRecord` (one CSV row); the summary groups profit gain ratios by
decile of computation- and bandwidth-intensive task share and by taskset
size, and :func:`emit_plots` draws those groups as box plots.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ldm import DiscretizationConfig
from .model import Instance, Solution, save_instance
from .solver import DEFAULT_BUDGET_NODES, TaskOption, solve_brute, solve_ldm
from .taskgen import (SMALL_ARCHITECTURE, Architecture, ArchitectureConfig, TasksetGenConfig,
                      generate_taskset, sample_architecture)
from .verify import verify
from .zsg import zsg_solve

CSV_HEADER = ("taskset_id", "seed", "n_tasks", "ub", "uc", "algo", "b_unit", "c_unit", "profit",
              "ratio", "wall_ms", "optimal", "pct_ci", "pct_bi")
INTENSITY_SHARE = 0.2
DECILES = tuple(f"{10 * k}-{10 * (k + 1)}" for k in range(10))

# LDM runtime allowance as a multiple of the slowest ZSG run of the same size
ZSG_MULTIPLE = {5.0: 600.0, 15.0: 200.0}
DEFAULT_MULTIPLE = 600.0


@dataclass(frozen=True)
class RunRecord:
    taskset_id: str
    seed: int
    n_tasks: int
    ub: float
    uc: float
    algo: str
    b_unit: float | None
    c_unit: float | None
    profit: float
    ratio: float
    wall_ms: float
    optimal: bool | None
    pct_ci: float
    pct_bi: float

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0 + 1e-12:
            raise ValueError(f"profit gain ratio {self.ratio} outside [0, 1]")

    def row(self) -> list[str]:
        def cell(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, float):
                return repr(v)
            return str(v)
        return [cell(getattr(self, name)) for name in CSV_HEADER]


@dataclass(frozen=True)
class Algorithm:
    """``zsg``, or an exact solver (``ldm`` / ``brute``) with its minimum units."""

    name: str
    b_unit: float | None = None
    c_unit: float | None = None

    def __post_init__(self):
        if self.name not in ("zsg", "ldm", "brute"):
            raise ValueError(f"unknown algorithm {self.name!r}")
        if (self.name == "zsg") != (self.b_unit is None and self.c_unit is None):
            raise ValueError("minimum units are required for exact solvers and only for them")

    @classmethod
    def parse(cls, text: str) -> "Algorithm":
        """``zsg``, ``ldm-5`` (both units 5) or ``ldm-5-10`` (bandwidth 5, compute 10)."""
        m = re.fullmatch(r"(zsg|ldm|brute)(?:-([0-9.]+)(?:-([0-9.]+))?)?", text)
        if not m:
            raise ValueError(f"cannot parse algorithm {text!r}")
        name, b, c = m.groups()
        if b is None:
            return cls(name)
        return cls(name, float(b), float(c if c is not None else b))

    @property
    def tag(self) -> str:
        if self.name == "zsg":
            return "zsg"
        if self.b_unit == self.c_unit:
            return f"{self.name}-{self.b_unit:g}"
        return f"{self.name}-{self.b_unit:g}-{self.c_unit:g}"


@dataclass(frozen=True)
class CampaignGrid:
    seeds: tuple[int, ...] = tuple(range(10))
    sizes: tuple[int, ...] = (10, 20, 30)
    ub: tuple[float, ...] = (0.3, 0.6, 0.9)
    # None: three levels from 1 up to the architecture's total normalized compute
    uc: tuple[float, ...] | None = None
    algorithms: tuple[str, ...] = ("zsg", "ldm-5", "ldm-15")
    architecture: ArchitectureConfig = SMALL_ARCHITECTURE
    arch_seed: int = 0
    # fixed per-solve budgets; with budget_secs None the ZSG-multiple rule applies
    budget_secs: float | None = None
    budget_nodes: int | None = DEFAULT_BUDGET_NODES
    zsg_multiple: Mapping[float, float] = field(default_factory=lambda: dict(ZSG_MULTIPLE))
    workers: int = 1

    def __post_init__(self):
        for a in self.algorithms:
            Algorithm.parse(a)
        if not (self.seeds and self.sizes and self.ub):
            raise ValueError("grid axes must be non-empty")


@dataclass(frozen=True)
class Intensity:
    computation: bool
    bandwidth: bool


def profit_gain_ratio(instance: Instance, solution: Solution) -> float:
    """Achieved profit over the total profit of the taskset."""
    total = instance.total_profit
    if total == 0:
        if solution.profit == 0:
            return 1.0
        raise ValueError("positive profit on a taskset whose total profit is zero")
    return solution.profit / total


def classify_intensity(instance: Instance) -> dict[str, Intensity]:
    """Flag tasks whose demand rate over their window exceeds 20% of the relevant minimum capacity.

    The window is the deadline minus twice the mean backhaul delay. A task
    whose window is not positive is flagged on both resources.
    """
    d_mean = float(np.mean(list(instance.topology.delay.values())))
    min_c = min(s.compute_capacity for s in instance.servers)
    out = {}
    for t in instance.tasks:
        window = t.deadline - 2 * d_mean
        if window <= 0:
            out[t.id] = Intensity(True, True)
            continue
        min_b = min(instance.ap(j).bandwidth_capacity for j in t.reachable_aps)
        out[t.id] = Intensity(t.cycles / window > INTENSITY_SHARE * min_c,
                              t.size / window > INTENSITY_SHARE * min_b)
    return out


def intensity_shares(instance: Instance) -> tuple[float, float]:
    """Percent of computation-intensive and of bandwidth-intensive tasks."""
    flags = classify_intensity(instance).values()
    n = max(len(flags), 1)
    return (100.0 * sum(f.computation for f in flags) / n,
            100.0 * sum(f.bandwidth for f in flags) / n)


def decile(pct: float) -> str:
    return DECILES[min(int(pct // 10), 9)]


def uc_levels(arch: Architecture, count: int = 3) -> tuple[float, ...]:
    """``count`` compute utilizations from 1 to the total normalized compute capacity."""
    caps = [s.compute_capacity for s in arch.servers]
    top = sum(caps) / min(caps)
    return tuple(float(x) for x in np.linspace(1.0, top, count))


def injected_options(instance: Instance, cfg: DiscretizationConfig,
                     solution: Solution) -> list[list[TaskOption]]:
    """One option per assignment of ``solution``, its grants expressed in (fractional) units."""
    out = []
    for task in instance.tasks:
        a = solution.by_task().get(task.id)
        if a is None:
            out.append([])
        else:
            out.append([TaskOption(task.id, a.ap_id, a.server_id, a.bandwidth / cfg.b_unit,
                                   a.compute / cfg.c_unit, task.profit)])
    return out


@dataclass(frozen=True)
class _Cell:
    taskset_id: str
    seed: int
    n_tasks: int
    ub: float
    uc: float
    instance_doc: str


def _cells(grid: CampaignGrid, arch: Architecture) -> list[_Cell]:
    levels = grid.uc if grid.uc is not None else uc_levels(arch)
    cells = []
    for n in grid.sizes:
        for a, ub in enumerate(grid.ub):
            for b, uc in enumerate(levels):
                uc_n = min(uc, float(n))
                for seed in grid.seeds:
                    ss = np.random.SeedSequence([grid.arch_seed, seed, n, a, b])
                    inst = generate_taskset(arch, TasksetGenConfig(n, ub, uc_n),
                                            np.random.default_rng(ss))
                    tid = f"n{n}-ub{ub:g}-uc{uc_n:.2f}-s{seed}"
                    cells.append(_Cell(tid, seed, n, ub, uc_n, save_instance(inst)))
    return cells


def _run(cell: _Cell, algo: Algorithm, budget_secs: float | None,
         budget_nodes: int | None) -> tuple[RunRecord, str]:
    from .model import load_instance, save_solution

    instance = load_instance(cell.instance_doc)
    optimal = None
    start = time.perf_counter()
    if algo.name == "zsg":
        solution = zsg_solve(instance)
    else:
        cfg = DiscretizationConfig(algo.b_unit, algo.c_unit)
        if algo.name == "ldm":
            solution, stats = solve_ldm(instance, cfg, budget_nodes=budget_nodes,
                                        budget_secs=budget_secs)
            optimal = stats.proven_optimal
        else:
            solution = solve_brute(instance, cfg)
            optimal = True
    wall_ms = 1000.0 * (time.perf_counter() - start)
    report = verify(instance, solution)
    if not report.feasible:
        raise RuntimeError(f"{algo.tag} produced an infeasible solution on {cell.taskset_id}: "
                           f"{sorted(report.tags())}")
    pct_ci, pct_bi = intensity_shares(instance)
    record = RunRecord(cell.taskset_id, cell.seed, cell.n_tasks, cell.ub, cell.uc, algo.tag,
                       algo.b_unit, algo.c_unit, solution.profit,
                       profit_gain_ratio(instance, solution), wall_ms, optimal, pct_ci, pct_bi)
    return record, save_solution(solution)


def _map(fn, jobs, workers):
    """Results in job order, yielded as soon as each one is available."""
    if workers <= 1:
        for job in jobs:
            yield fn(*job)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *job) for job in jobs]
        for f in futures:
            yield f.result()


@dataclass
class CampaignResult:
    records: list[RunRecord]
    summary: dict
    instances: dict[str, str] = field(default_factory=dict)
    solutions: dict[tuple[str, str], str] = field(default_factory=dict)

    def csv_text(self) -> str:
        return records_csv(self.records)


def _sort_key(r: RunRecord):
    return (r.n_tasks, r.ub, r.uc, r.seed, r.algo)


def run_campaign(grid: CampaignGrid, progress=None) -> CampaignResult:
    """Run every algorithm of ``grid`` on every generated taskset.

    ZSG runs first; exact solvers then get ``budget_secs`` if set, otherwise
    the ZSG multiple for their bandwidth unit times the slowest ZSG run among
    tasksets of the same size. A run that exhausts its budget is recorded
    with ``optimal=false``. Every solution is re-verified before it becomes
    a record. Records come back sorted by taskset and algorithm.
    """
    arch = sample_architecture(grid.architecture, grid.arch_seed)
    cells = _cells(grid, arch)
    algos = [Algorithm.parse(a) for a in grid.algorithms]
    zsg = Algorithm("zsg")
    results = []

    zsg_runs = list(_map(_run, [(c, zsg, None, None) for c in cells], 1))
    slowest: dict[int, float] = {}
    for (rec, _), cell in zip(zsg_runs, cells):
        slowest[cell.n_tasks] = max(slowest.get(cell.n_tasks, 0.0), rec.wall_ms / 1000.0)
    if any(a.name == "zsg" for a in algos):
        results += zsg_runs

    jobs = []
    for cell in cells:
        for algo in algos:
            if algo.name == "zsg":
                continue
            if grid.budget_secs is not None:
                secs = grid.budget_secs
            else:
                multiple = grid.zsg_multiple.get(algo.b_unit, DEFAULT_MULTIPLE)
                secs = multiple * slowest[cell.n_tasks]
            jobs.append((cell, algo, secs, grid.budget_nodes))
    for n, out in enumerate(_map(_run, jobs, grid.workers)):
        results.append(out)
        if progress is not None:
            progress(n + 1, len(jobs), out[0])

    results.sort(key=lambda pair: _sort_key(pair[0]))
    records = [r for r, _ in results]
    return CampaignResult(records, summarize(records),
                          {c.taskset_id: c.instance_doc for c in cells},
                          {(r.taskset_id, r.algo): doc for r, doc in results})


def records_csv(records: Iterable[RunRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in sorted(records, key=_sort_key):
        writer.writerow(r.row())
    return buf.getvalue()


def read_records_csv(text: str) -> list[RunRecord]:
    def num(v):
        return None if v == "" else float(v)

    def flag(v):
        return None if v == "" else v == "true"

    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(RunRecord(row["taskset_id"], int(row["seed"]), int(row["n_tasks"]),
                             float(row["ub"]), float(row["uc"]), row["algo"], num(row["b_unit"]),
                             num(row["c_unit"]), float(row["profit"]), float(row["ratio"]),
                             float(row["wall_ms"]), flag(row["optimal"]), float(row["pct_ci"]),
                             float(row["pct_bi"])))
    return out


def _stats(values: Sequence[float]) -> dict:
    return {"count": len(values), "mean": statistics.fmean(values),
            "median": statistics.median(values)}


def _grouped(records, key):
    groups: dict[tuple[str, str], list[float]] = {}
    for r in records:
        groups.setdefault((key(r), r.algo), []).append(r.ratio)
    return groups


def summarize(records: Sequence[RunRecord]) -> dict:
    """Mean and median profit gain ratio per algorithm, overall and per bucket."""
    algos = sorted({r.algo for r in records})
    out = {"buckets": "deciles of the percentage of intensive tasks", "algorithms": {}}
    for algo in algos:
        mine = [r for r in records if r.algo == algo]
        entry = _stats([r.ratio for r in mine])
        exact = [r.optimal for r in mine if r.optimal is not None]
        if exact:
            entry["proven_optimal"] = sum(exact)
            entry["unproven"] = len(exact) - sum(exact)
        out["algorithms"][algo] = entry
    axes = {"pct_ci": lambda r: decile(r.pct_ci), "pct_bi": lambda r: decile(r.pct_bi),
            "n_tasks": lambda r: str(r.n_tasks)}
    for name, key in axes.items():
        groups = _grouped(records, key)
        table = {}
        for (bucket, algo), ratios in sorted(groups.items()):
            table.setdefault(bucket, {})[algo] = _stats(ratios)
        out[name] = table
        if name != "n_tasks":
            out[f"{name}_empty"] = [b for b in DECILES if b not in table]
    return out


def box_stats(values: Sequence[float]) -> dict:
    """Quartiles, mean and Tukey whiskers (furthest points within 1.5 IQR of the box)."""
    v = np.sort(np.asarray(values, dtype=float))
    q1, med, q3 = (float(x) for x in np.percentile(v, [25, 50, 75]))
    iqr = q3 - q1
    inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
    return {"count": int(v.size), "q1": q1, "median": med, "q3": q3,
            "mean": float(v.mean()), "whislo": float(inside.min()), "whishi": float(inside.max()),
            "fliers": [float(x) for x in v if x < inside.min() or x > inside.max()]}


FIGURES = {
    "fig_ci": ("pct_ci", "computation-intensive tasks (%)"),
    "fig_bi": ("pct_bi", "bandwidth-intensive tasks (%)"),
    "fig_size": ("n_tasks", "tasks per taskset"),
}


def plot_tables(records: Sequence[RunRecord]) -> dict[str, list[dict]]:
    """Box-plot statistics per figure, bucket and algorithm; empty buckets are left out."""
    tables = {}
    for fig, (axis, _) in FIGURES.items():
        if axis == "n_tasks":
            key = lambda r: str(r.n_tasks)
            buckets = sorted({key(r) for r in records}, key=int)
        else:
            key = lambda r, axis=axis: decile(getattr(r, axis))
            buckets = [b for b in DECILES if any(key(r) == b for r in records)]
        groups = _grouped(records, key)
        rows = []
        for bucket in buckets:
            for algo in sorted({r.algo for r in records}):
                if (bucket, algo) in groups:
                    rows.append({"bucket": bucket, "algo": algo,
                                 **box_stats(groups[(bucket, algo)])})
        tables[fig] = rows
    return tables


def emit_plots(records: Sequence[RunRecord], out_dir: str) -> list[str]:
    """Write ``fig_ci.svg``, ``fig_bi.svg``, ``fig_size.svg`` and ``plot_stats.csv``.

    Each SVG carries its box statistics as JSON in the document description.
    """
    if not records:
        raise ValueError("no records to plot")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    tables = plot_tables(records)
    algos = sorted({r.algo for r in records})
    written = []
    for fig_name, (axis, label) in FIGURES.items():
        rows = tables[fig_name]
        buckets = list(dict.fromkeys(row["bucket"] for row in rows))
        fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(buckets) * len(algos)), 3.6))
        width = 0.8 / len(algos)
        for a, algo in enumerate(algos):
            mine = [row for row in rows if row["algo"] == algo]
            if not mine:
                continue
            where = [buckets.index(row["bucket"]) + (a - (len(algos) - 1) / 2) * width
                     for row in mine]
            art = ax.bxp([{"med": r["median"], "q1": r["q1"], "q3": r["q3"],
                           "whislo": r["whislo"], "whishi": r["whishi"], "mean": r["mean"],
                           "fliers": r["fliers"], "label": ""} for r in mine],
                         positions=where, widths=width * 0.85, showmeans=True,
                         patch_artist=True, manage_ticks=False)
            color = f"C{a}"
            for box in art["boxes"]:
                box.set_facecolor(color)
                box.set_alpha(0.5)
            ax.plot([], [], color=color, linewidth=6, alpha=0.5, label=algo)
        ax.set_xticks(range(len(buckets)))
        ax.set_xticklabels(buckets)
        ax.set_xlabel(label)
        ax.set_ylabel("profit gain ratio")
        ax.legend(fontsize="small")
        fig.tight_layout()
        path = os.path.join(out_dir, f"{fig_name}.svg")
        meta = {"figure": fig_name, "axis": axis, "buckets": "deciles" if axis != "n_tasks"
                else "taskset size", "boxes": rows}
        fig.savefig(path, format="svg", metadata={"Description": json.dumps(meta)})
        plt.close(fig)
        written.append(path)

    stats_path = os.path.join(out_dir, "plot_stats.csv")
    with open(stats_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["figure", "bucket", "algo", "count", "q1", "median", "q3", "mean",
                         "whislo", "whishi"])
        for fig_name, rows in tables.items():
            for r in rows:
                writer.writerow([fig_name, r["bucket"], r["algo"], r["count"], repr(r["q1"]),
                                 repr(r["median"]), repr(r["q3"]), repr(r["mean"]),
                                 repr(r["whislo"]), repr(r["whishi"])])
    written.append(stats_path)
    return written


def write_campaign(result: CampaignResult, out_dir: str, plots: bool = True) -> list[str]:
    """Records CSV, summary JSON and (optionally) the plots, all under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, "records.csv"), os.path.join(out_dir, "summary.json")]
    with open(paths[0], "w") as fh:
        fh.write(result.csv_text())
    with open(paths[1], "w") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if plots and result.records:
        paths += emit_plots(result.records, out_dir)
    return paths


def mean_ratio(records: Iterable[RunRecord], algo: str) -> float:
    ratios = [r.ratio for r in records if r.algo == algo]
    return statistics.fmean(ratios) if ratios else math.nan


__all__ = [
    "CSV_HEADER", "Algorithm", "CampaignGrid", "CampaignResult", "Intensity", "RunRecord",
    "box_stats", "classify_intensity", "decile", "emit_plots", "injected_options",
    "intensity_shares", "mean_ratio", "plot_tables", "profit_gain_ratio", "read_records_csv",
    "records_csv", "run_campaign", "summarize", "uc_levels", "write_campaign",
]
