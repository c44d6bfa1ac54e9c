"""
Controllers in the closed loop
==============================

Run the shipped grid network under the fixed cycle, the greedy rule and the
exact optimizer, then look at how waiting time and the count census evolve.
"""

import numpy as np

from signalis.qubo import Hyperparameters
from signalis.sim import FixedCycle, Optimized, Scenario, run_simulation
from signalis.synthetic import benchmark_grid

net = benchmark_grid()
print(len(net.signalized), "signalized intersections,", net.num_variables, "variables")

scenario = Scenario(net, initial_vehicle_count=400, duration=400, t_interval=5, seed=7)
controllers = {
    "fixed": FixedCycle(),
    "local": Optimized("local", Hyperparameters(0.05, 10.0), reference=True),
    "exact": Optimized("exact", Hyperparameters(0.05, 10.0)),
}

runs = {}
for name, ctrl in controllers.items():
    runs[name] = m = run_simulation(scenario, ctrl)
    print(f"{name:>6}: {m.total_waiting_s / 3600:6.2f} h waiting, "
          f"{m.vehicles_arrived}/{m.vehicles_loaded} arrived, {m.signal_switches} switches")

###############################################################################
# How far the greedy assignment sits above the optimum of the same QUBO, and
# how many modes see traffic at each step.

local = runs["local"]
err = np.array(local.per_step_rel_error)
print("greedy relative energy error: mean %.3f, max %.3f" % (np.nanmean(err), np.nanmax(err)))
print("nonzero first-order terms, first/last 5 steps:",
      local.first_order_nonzero[:5], local.first_order_nonzero[-5:])

###############################################################################
# A minimum green of 10 s through the dwell penalty, at one-second decisions.

fast = Scenario(net, initial_vehicle_count=400, duration=120, t_interval=1, seed=7)
for T in (None, 10.0):
    m = run_simulation(fast, Optimized("exact", crossing_time=T))
    print(f"crossing time {T}: {m.signal_switches} switches, {m.total_waiting_s / 3600:.2f} h")
