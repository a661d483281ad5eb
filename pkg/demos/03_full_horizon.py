"""Walkthrough 3: the full 24-hour experiment, three schemes side by side.

For every hourly slot of the built-in six-data-center scenario this runs:

  ICG    - the interactive game: the grid solves the constrained-MDP
           pricing LP against the merge/split coalition dynamics, and
           profits are long-run averages under the optimal policy;
  CENT   - a centralized planner that picks the single best in-band
           (partition, action) pair, an upper benchmark for the grid;
  NoCoop - no federation, every provider serves its own workload and the
           grid picks its best single in-band action.

Reports land in ./out_paper6 as CSV files plus summary.txt with the
per-horizon averages and improvement percentages.

Run:  python demos/03_full_horizon.py    (the full horizon; several
minutes of wall time, almost all of it in the 24 pricing LPs)
"""

import time

from gridcoal.harness import format_summary, run_experiment, write_report
from gridcoal.scenario import paper6

scenario = paper6()
t0 = time.time()


def progress(slot, scheme, record):
    print(f"slot {slot:2d} {scheme:7} sg_profit {record.sg_profit:10.2f} "
          f"cp_total {sum(record.cp_profit.values()):10.2f} "
          f"[{time.time() - t0:6.1f} s]", flush=True)


report = run_experiment(scenario, progress=progress)
print()
print(format_summary(report))
paths = write_report(report, "out_paper6")
print("written:")
for p in paths:
    print(" ", p)
