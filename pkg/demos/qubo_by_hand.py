"""
Building and solving a signal QUBO
==================================

Two signalized intersections share a two-way link. Each has a cross-street
mode and a mode that serves the link, so green waves only happen when both
pick the link mode.
"""

import numpy as np

from signalis.network import Intersection, Mode, Movement, RoadNetwork, Segment, compute_B, compute_R
from signalis.qubo import Hyperparameters, TrafficCounts, build_qubo, evaluate
from signalis.solvers import SaConfig, solve_exact, solve_local, solve_sa


def two_way(a, b, length=100.0, speed=10.0):
    return [Segment(f"{a}>{b}", a, b, length, speed), Segment(f"{b}>{a}", b, a, length, speed)]


segments = (two_way("a", "I") + two_way("I", "b") + two_way("w", "I") + two_way("I", "J")
            + two_way("c", "J") + two_way("J", "d") + two_way("J", "e"))
modes = {
    "I": [[("a>I", "I>b"), ("b>I", "I>a")], [("w>I", "I>J"), ("J>I", "I>w")]],
    "J": [[("c>J", "J>d"), ("d>J", "J>c")], [("I>J", "J>e"), ("e>J", "J>I")]],
}
nodes = []
for name in sorted({s.source for s in segments} | {s.target for s in segments}):
    if name in modes:
        nodes.append(Intersection(name, tuple(
            Mode(k, frozenset(Movement(a, e) for a, e in mv)) for k, mv in enumerate(modes[name]))))
    else:
        nodes.append(Intersection(name, (), False))
net = RoadNetwork.build(nodes, segments)

print("B:", compute_B(net))
print("R:", {k: v for k, v in compute_R(net).items() if v})

###############################################################################
# The cross streets are a little busier, so the greedy controller picks mode 0
# at both nodes. With the coupling turned on the link mode wins.

counts = TrafficCounts({("I", 0): 1.0, ("I", 1): 0.5, ("J", 0): 1.0, ("J", 1): 0.5})
for beta in (0.0, 0.3):
    q = build_qubo(net, counts, Hyperparameters(beta, gamma=10.0))
    exact = solve_exact(q)
    sa = solve_sa(q, SaConfig(num_reads=100, num_sweeps=200, seed=1), counts)
    greedy = solve_local(counts, net)
    print(f"beta={beta}: exact {exact.assignment.selected} E={exact.best_energy:.3f}, "
          f"sa E={sa.best_energy:.3f}, "
          f"greedy {greedy.selected} E={evaluate(q, q.index.encode(greedy.selected)):.3f}")

###############################################################################
# The dense matrix is handy for eyeballing small problems.

print(np.round(q.to_dense(), 3))
