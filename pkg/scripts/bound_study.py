"""Nodes and time to prove optimality with the profit-sum bound vs. the priced bound.

    python scripts/bound_study.py --sizes 10 20 --unit 15 --node-cap 2000000
"""

import argparse

import numpy as np

from edgealloc.ldm import DiscretizationConfig
from edgealloc.solver import branch_and_bound, capacities, enumerate_options
from edgealloc.taskgen import SMALL_ARCHITECTURE, TasksetGenConfig, generate_taskset, \
    sample_architecture


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 20])
    ap.add_argument("--unit", type=float, default=15.0)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--node-cap", type=int, default=2_000_000)
    ap.add_argument("--secs", type=float, default=120.0)
    args = ap.parse_args()

    arch = sample_architecture(SMALL_ARCHITECTURE, 0)
    cfg = DiscretizationConfig(args.unit, args.unit)
    total_c = sum(s.compute_capacity for s in arch.servers)
    top = total_c / min(s.compute_capacity for s in arch.servers)
    print("n    ub   uc     bound       profit   nodes      proven  secs")
    for n in args.sizes:
        for ub in (0.3, 0.9):
            for seed in range(args.seeds):
                uc = min(float(n), top)
                inst = generate_taskset(arch, TasksetGenConfig(n, ub, uc),
                                        np.random.default_rng([seed, n]))
                opts = enumerate_options(inst, cfg)
                u, v = capacities(inst, cfg)
                for bound in ("trivial", "lagrangian"):
                    sel, st = branch_and_bound(opts, u, v, args.node_cap, args.secs, bound)
                    print(f"{n:<4} {ub:<4} {uc:<6.2f} {bound:<11} {sel.profit:<8g} "
                          f"{st.nodes:<10} {str(st.proven_optimal):<7} {st.wall_time:.2f}",
                          flush=True)


if __name__ == "__main__":
    main()
