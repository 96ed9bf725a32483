"""Run the desk-scale ZSG / LDM-5 / LDM-15 campaign and write CSV, summary and plots.

    python scripts/run_campaign.py --out results/campaign
    python scripts/run_campaign.py --out results/zsgbudget --zsg-budget

By default every LDM solve gets the solver's fixed budget; ``--zsg-budget``
switches to 600x (unit 5) / 200x (unit 15) the slowest ZSG run of the same
taskset size.
"""

import argparse
import json
import sys
import time

from edgealloc.bench import CampaignGrid, run_campaign, write_campaign
from edgealloc.solver import DEFAULT_BUDGET_SECS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 20, 30])
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--zsg-budget", action="store_true")
    ap.add_argument("--budget-secs", type=float, default=DEFAULT_BUDGET_SECS)
    args = ap.parse_args()

    grid = CampaignGrid(seeds=tuple(range(args.seeds)), sizes=tuple(args.sizes),
                        budget_secs=None if args.zsg_budget else args.budget_secs,
                        workers=args.workers)
    start = time.perf_counter()

    def progress(done, total, rec):
        if not rec.optimal or done % 20 == 0:
            print(f"[{done}/{total}] {rec.taskset_id} {rec.algo} ratio={rec.ratio:.4f} "
                  f"optimal={rec.optimal} {rec.wall_ms:.0f} ms", file=sys.stderr, flush=True)

    result = run_campaign(grid, progress)
    for path in write_campaign(result, args.out):
        print("wrote", path, file=sys.stderr)
    print(json.dumps(result.summary["algorithms"], indent=2, sort_keys=True))
    print(f"{time.perf_counter() - start:.0f} s", file=sys.stderr)


if __name__ == "__main__":
    main()
