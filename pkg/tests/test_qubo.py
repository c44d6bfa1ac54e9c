import itertools

import numpy as np
import pytest

from conftest import coupled_pair
from oracles import direct_energy, variable_order
from signalis.qubo import (
    DwellState,
    Hyperparameters,
    Qubo,
    TrafficCounts,
    VariableIndex,
    add_dwell_penalty,
    build_qubo,
    decode,
    dump_counts,
    evaluate,
    export_triplets,
    import_triplets,
    load_counts,
    one_hot_terms,
)
from signalis.synthetic import corridor, random_network, single_intersection

GAMMA = 10.0


@pytest.fixture
def single():
    net = single_intersection()
    i = net.signalized[0]
    return net, i


def test_single_intersection_terms(single):
    net, i = single
    q = build_qubo(net, TrafficCounts({(i, 0): 3, (i, 1): 1}), Hyperparameters(0.7, GAMMA))
    assert q.linear.tolist() == pytest.approx([-1 - 10, -1 / 3 - 10], abs=1e-15)
    assert q.quadratic == {(0, 1): 20.0}
    assert q.offset == 10.0


@pytest.mark.parametrize("x,energy", [
    ((1, 0), -1.0),
    ((0, 1), -1 / 3),
    ((0, 0), 10.0),
    ((1, 1), 10 - 4 / 3),
])
def test_single_intersection_energies(single, x, energy):
    net, i = single
    q = build_qubo(net, TrafficCounts({(i, 0): 3, (i, 1): 1}), Hyperparameters(0.0, GAMMA))
    assert evaluate(q, np.array(x)) == pytest.approx(energy, abs=1e-12)


def test_all_zero_counts_pure_penalty():
    net = corridor()
    q = build_qubo(net, TrafficCounts(), Hyperparameters(0.0, GAMMA))
    idx = q.index
    assert not q.first_order.any()
    for combo in itertools.product(*(range(len(idx.group(i))) for i in idx.intersections)):
        assert evaluate(q, idx.encode(dict(zip(idx.intersections, combo)))) == 0.0
    assert evaluate(q, np.zeros(q.num_vars, dtype=int)) == GAMMA * len(idx.intersections)


def test_coupling_coefficient(pair):
    q = build_qubo(pair, TrafficCounts({("I", 0): 1}), Hyperparameters(0.3, GAMMA))
    idx = q.index
    k, l = idx.var("I", 1), idx.var("J", 1)
    assert q.quadratic[(k, l)] == pytest.approx(-1.2, abs=1e-15)
    # incompatible pairs get no coupling at all
    assert (idx.var("I", 0), idx.var("J", 0)) not in q.quadratic


def test_evaluate_all_zero_offset():
    net = corridor(2)
    q = build_qubo(net, TrafficCounts(), Hyperparameters(0.0, GAMMA))
    assert evaluate(q, np.zeros(q.num_vars, dtype=int)) == 20.0


def test_evaluate_length_mismatch(single):
    net, _ = single
    q = build_qubo(net, TrafficCounts(), Hyperparameters())
    with pytest.raises(ValueError):
        evaluate(q, np.zeros(3, dtype=int))


def test_unknown_and_negative_counts_rejected(single):
    net, i = single
    with pytest.raises(ValueError, match="unknown"):
        build_qubo(net, TrafficCounts({(i, 7): 1}), Hyperparameters())
    with pytest.raises(ValueError, match="negative"):
        build_qubo(net, TrafficCounts({(i, 0): -1}), Hyperparameters())


def test_hyperparameter_validation():
    with pytest.raises(ValueError):
        Hyperparameters(-0.1, 10)
    with pytest.raises(ValueError):
        Hyperparameters(0.0, 0.0)


def test_qubo_rejects_lower_triangular_and_zero_entries():
    with pytest.raises(ValueError):
        Qubo(3, np.zeros(3), {(2, 1): 1.0})
    with pytest.raises(ValueError):
        Qubo(3, np.zeros(3), {(0, 1): 0.0})


def test_variable_index_order():
    net = corridor()
    idx = VariableIndex.from_network(net)
    assert idx.keys == tuple(variable_order(net.to_dict()))
    for k, key in enumerate(idx.keys):
        assert idx.var(*key) == k and idx.key(k) == key


def test_matches_direct_formula_on_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(30):
        net = random_network(rng, int(rng.integers(1, 6)), max_modes=3)
        idx = VariableIndex.from_network(net)
        if not len(idx):
            continue
        raw = {key: int(rng.integers(0, 6)) for key in idx.keys}
        beta = float(rng.choice([0.0, 0.03, 0.1, 0.5]))
        q = build_qubo(net, TrafficCounts({k: float(v) for k, v in raw.items()}), Hyperparameters(beta, GAMMA))
        doc = net.to_dict()
        for _ in range(10):
            bits = rng.integers(0, 2, len(idx))
            x = dict(zip(idx.keys, bits.tolist()))
            assert evaluate(q, bits) == pytest.approx(direct_energy(doc, raw, x, beta, GAMMA), abs=1e-9)


def test_doubling_counts_leaves_qubo_unchanged():
    net = corridor()
    idx = VariableIndex.from_network(net)
    c = {key: float(k % 4) for k, key in enumerate(idx.keys)}
    a = build_qubo(net, TrafficCounts(c), Hyperparameters(0.05, GAMMA))
    b = build_qubo(net, TrafficCounts({k: 2 * v for k, v in c.items()}), Hyperparameters(0.05, GAMMA))
    assert np.array_equal(a.linear, b.linear)
    assert a.quadratic == b.quadratic and a.offset == b.offset


# ---------------------------------------------------------------- decode


def test_decode_one_hot(single):
    net, i = single
    idx = VariableIndex.from_network(net)
    a = decode(np.array([0, 1]), idx)
    assert a.selected == {i: 1} and a.feasible and not a.repaired


def test_decode_both_set_keeps_busiest(single):
    net, i = single
    idx = VariableIndex.from_network(net)
    a = decode(np.array([1, 1]), idx, TrafficCounts({(i, 0): 3, (i, 1): 1}))
    assert a.selected == {i: 0} and not a.feasible and a.repaired == {i}


def test_decode_none_set_takes_busiest(single):
    net, i = single
    idx = VariableIndex.from_network(net)
    a = decode(np.array([0, 0]), idx, TrafficCounts({(i, 1): 5}))
    assert a.selected == {i: 1} and a.repaired == {i}


def test_decode_ties_go_low(single):
    net, i = single
    idx = VariableIndex.from_network(net)
    assert decode(np.array([1, 1]), idx, TrafficCounts({(i, 0): 2, (i, 1): 2})).selected == {i: 0}
    assert decode(np.array([0, 0]), idx).selected == {i: 0}


# ---------------------------------------------------------------- dwell penalty


def test_dwell_worked_example(single):
    net, i = single
    q = build_qubo(net, TrafficCounts({(i, 0): 3, (i, 1): 1}), Hyperparameters())
    q4 = add_dwell_penalty(q, DwellState({(i, 0): 0.0, (i, 1): 7.0}, {i: 10.0}))
    assert (q4.linear - q.linear).tolist() == [100.0, 9.0]
    assert q4.quadratic == q.quadratic and q4.offset == q.offset


@pytest.mark.parametrize("tau", [10.0, 12.5])
def test_dwell_no_penalty_at_or_past_crossing_time(single, tau):
    net, i = single
    q = build_qubo(net, TrafficCounts({(i, 0): 1}), Hyperparameters())
    q4 = add_dwell_penalty(q, DwellState({(i, 0): tau, (i, 1): tau}, {i: 10.0}))
    assert q4 is q


def test_dwell_validation(single):
    net, i = single
    q = build_qubo(net, TrafficCounts(), Hyperparameters())
    with pytest.raises(ValueError):
        add_dwell_penalty(q, DwellState({(i, 0): -1.0}, {i: 10.0}))
    with pytest.raises(ValueError):
        add_dwell_penalty(q, DwellState({}, {i: 0.0}))
    with pytest.raises(ValueError):
        add_dwell_penalty(q, DwellState({}, {}))


# ---------------------------------------------------------------- files


def test_counts_round_trip(tmp_path):
    c = TrafficCounts({("a", 0): 3.0, ("b", 1): 2.0})
    dump_counts(c, tmp_path / "c.json")
    assert load_counts(tmp_path / "c.json") == c


def test_counts_unknown_keys(tmp_path):
    (tmp_path / "c.json").write_text('[{"intersection": "a", "mode": 0, "count": 1, "lane": 2}]')
    with pytest.raises(ValueError):
        load_counts(tmp_path / "c.json")


def test_triplet_round_trip(tmp_path):
    net = corridor()
    idx = VariableIndex.from_network(net)
    q = build_qubo(net, TrafficCounts({idx.keys[0]: 2.0, idx.keys[3]: 1.0}), Hyperparameters(0.08, GAMMA))
    export_triplets(q, tmp_path / "q.txt")
    back = import_triplets(tmp_path / "q.txt")
    assert back.num_vars == q.num_vars and back.offset == q.offset
    assert np.array_equal(back.linear, q.linear) and back.quadratic == q.quadratic
    assert (tmp_path / "q.txt").read_text().splitlines()[0] == f"{q.num_vars} {q.offset!r}"


def test_one_hot_terms_reproduce_energy():
    net = corridor()
    idx = VariableIndex.from_network(net)
    q = build_qubo(net, TrafficCounts({idx.keys[1]: 4.0, idx.keys[2]: 1.0}), Hyperparameters(0.1, GAMMA))
    unary, pairwise = one_hot_terms(q)
    for combo in itertools.product(*(range(len(idx.group(i))) for i in idx.intersections)):
        sel = dict(zip(idx.intersections, combo))
        e = q.offset + sum(unary[i][m] for i, m in sel.items())
        e += sum(t[sel[i], sel[j]] for (i, j), t in pairwise.items())
        assert e == pytest.approx(evaluate(q, idx.encode(sel)), abs=1e-12)
