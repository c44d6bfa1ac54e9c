"""
A small multi-instance experiment
=================================

Grid-search beta per load, run every controller on every instance and write
CSV plus SVG charts. Settings are shrunk so this finishes in a minute or two;
drop the overrides to run the full protocol.
"""

import sys
from pathlib import Path

from signalis.experiment import ExperimentPlan, relative_error, run_experiment

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_results")
plan = ExperimentPlan(
    flows=(200, 400, 600),
    instances_per_flow=3,
    controllers=("fixed", "local", "exact", "sa"),
    beta_grid=(0.0, 0.02, 0.05, 0.1),
    sa_num_reads=50,
    sa_num_sweeps=200,
)
result = run_experiment(plan, out, plots=True)

print("chosen beta:", result.betas)
for flow in plan.flows:
    opt = result.mean_waiting(flow, "exact") / 3600
    fixed = result.mean_waiting(flow, "fixed") / 3600
    sa_err = result.rel_energy_error[(flow, "sa")][0]
    print(f"{flow}: exact {opt:.2f} h, fixed {fixed:.2f} h, "
          f"fixed is {relative_error(opt, fixed):+.1f}% worse, SA energy error {100 * sa_err:.1f}%")
print("wrote", sorted(p.name for p in out.iterdir()))
