import itertools

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from signalis.network import RoadNetwork, compute_B, compute_R
from signalis.qubo import (
    DwellState,
    Hyperparameters,
    TrafficCounts,
    VariableIndex,
    add_dwell_penalty,
    build_qubo,
    evaluate,
)
from signalis.solvers import ising_energy, qubo_to_ising, solve_binary, solve_exact
from signalis.synthetic import random_network

seeds = st.integers(0, 2**32 - 1)
betas = st.sampled_from([0.0, 0.02, 0.05, 0.09, 0.1])


def net_and_counts(seed, size=(1, 7), max_modes=3):
    rng = np.random.default_rng(seed)
    net = random_network(rng, int(rng.integers(*size)), max_modes=max_modes, unsignalized_fraction=0.2)
    idx = VariableIndex.from_network(net)
    counts = TrafficCounts({k: float(rng.integers(0, 6)) for k in idx.keys})
    return net, idx, counts


def rename(net, f):
    doc = net.to_dict()
    seg = lambda s: f"{f(s.split('>')[0])}>{f(s.split('>')[1])}"
    for node in doc["intersections"]:
        node["id"] = f(node["id"])
        for mode in node["modes"]:
            for mv in mode:
                mv["approach"], mv["exit"] = seg(mv["approach"]), seg(mv["exit"])
    for s in doc["segments"]:
        s["id"], s["from"], s["to"] = seg(s["id"]), f(s["from"]), f(s["to"])
    return RoadNetwork.from_dict(doc)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_R_symmetric_and_bounded(seed):
    net, _, _ = net_and_counts(seed)
    R = compute_R(net)
    for ((i, m), (j, n)), v in R.items():
        assert R[(j, n), (i, m)] == v and 0 <= v <= 2
        assert j in net.adjacency[i]


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.1, 10.0))
def test_B_invariant_under_uniform_length_scaling(seed, k):
    net, _, _ = net_and_counts(seed)
    doc = net.to_dict()
    for s in doc["segments"]:
        s["length_m"] *= k
    scaled = compute_B(RoadNetwork.from_dict(doc))
    B = compute_B(net)
    assert B.keys() == scaled.keys()
    for p in B:
        assert scaled[p] == pytest.approx(B[p], rel=1e-12)
    assert not B or max(B.values()) == 1.0


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_B_and_R_invariant_under_relabelling(seed):
    net, _, _ = net_and_counts(seed)
    f = lambda n: "z" + n[::-1]
    other = rename(net, f)
    B = {frozenset(p): v for p, v in compute_B(net).items()}
    B2 = {frozenset(p): v for p, v in compute_B(other).items()}
    assert B2 == {frozenset(f(n) for n in p): v for p, v in B.items()}
    R2 = compute_R(other)
    for ((i, m), (j, n)), v in compute_R(net).items():
        assert R2[(f(i), m), (f(j), n)] == v


@settings(max_examples=40, deadline=None)
@given(seeds, betas)
def test_ising_preserves_every_energy(seed, beta):
    net, idx, counts = net_and_counts(seed, size=(1, 4), max_modes=2)
    assume(0 < len(idx) <= 10)
    q = build_qubo(net, counts, Hyperparameters(beta))
    h, J, off = qubo_to_ising(q)
    for bits in itertools.product((0, 1), repeat=len(idx)):
        x = np.array(bits)
        assert ising_energy(h, J, off, 2 * x - 1) == pytest.approx(evaluate(q, x), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seeds, betas)
def test_one_hot_optimum_is_the_global_optimum(seed, beta):
    net, idx, counts = net_and_counts(seed, size=(1, 6))
    assume(0 < len(idx) <= 14)
    q = build_qubo(net, counts, Hyperparameters(beta, 10.0))
    full = solve_binary(q)
    one_hot = solve_exact(q)
    assert one_hot.best_energy == full.best_energy
    assert one_hot.assignment.feasible


@settings(max_examples=40, deadline=None)
@given(seeds, betas, st.sampled_from([2.0, 3.0, 0.5, 7.0]))
def test_scaling_counts_leaves_qubo_unchanged(seed, beta, k):
    net, idx, counts = net_and_counts(seed)
    assume(len(idx))
    a = build_qubo(net, counts, Hyperparameters(beta))
    b = build_qubo(net, TrafficCounts({key: k * v for key, v in counts.C.items()}), Hyperparameters(beta))
    assert np.allclose(a.linear, b.linear, rtol=0, atol=1e-12)
    assert a.quadratic == b.quadratic and a.offset == b.offset


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(1.0, 60.0), st.floats(0.0, 1e3))
def test_dwell_penalty_vanishes_once_crossing_time_passed(seed, T, extra):
    net, idx, counts = net_and_counts(seed)
    assume(len(idx))
    q = build_qubo(net, counts, Hyperparameters(0.05))
    state = DwellState({k: T + extra for k in idx.keys}, {i: T for i in idx.intersections})
    q4 = add_dwell_penalty(q, state)
    assert np.array_equal(q4.linear, q.linear)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(1.0, 60.0), st.data())
def test_dwell_penalty_is_squared_shortfall(seed, T, data):
    net, idx, counts = net_and_counts(seed)
    assume(len(idx))
    q = build_qubo(net, counts, Hyperparameters(0.05))
    tau = {k: data.draw(st.floats(0.0, 2 * T)) for k in idx.keys}
    q4 = add_dwell_penalty(q, DwellState(tau, {i: T for i in idx.intersections}))
    for k, key in enumerate(idx.keys):
        expected = (T - tau[key]) ** 2 if tau[key] < T else 0.0
        assert q4.linear[k] - q.linear[k] == pytest.approx(expected, rel=1e-12, abs=1e-9)
