import json

import pytest

from conftest import coupled_pair, make_network, two_way
from oracles import tables_from_doc
from signalis.network import (
    NetworkError,
    RoadNetwork,
    compute_B,
    compute_R,
    dump_network,
    load_network,
    validate,
)
from signalis.synthetic import (
    BUILTIN_NETWORKS,
    benchmark_grid,
    builtin,
    corridor,
    random_network,
    single_intersection,
)


def chain(lengths, speed=10.0):
    """Signalized i-j-k... chain with one U-turn-free mode per node."""
    names = [chr(ord("i") + k) for k in range(len(lengths) + 1)]
    segs = []
    for (a, b), length in zip(zip(names, names[1:]), lengths):
        segs += two_way(a, b, length, speed)
    modes = {}
    for n in names:
        inc = [s[0] for s in segs if s[2] == n]
        out = [s[0] for s in segs if s[1] == n]
        modes[n] = [[(a, e) for a in inc for e in out]]
    return make_network(segs, modes)


# ---------------------------------------------------------------- B


def test_single_pair_scales_to_one():
    assert compute_B(chain([100.0])) == {("i", "j"): 1.0}


def test_two_pairs_scale_by_the_faster():
    B = compute_B(chain([100.0, 200.0]))
    assert B == {("i", "j"): 1.0, ("j", "k"): 0.5}


def test_both_directions_equal_match_single_direction():
    segs = [("i>j", "i", "j", 100.0, 10.0), ("x>i", "x", "i", 50.0, 10.0), ("j>y", "j", "y", 50.0, 10.0)]
    one = make_network(segs, {"i": [[("x>i", "i>j")]], "j": [[("i>j", "j>y")]]})
    assert compute_B(one) == compute_B(chain([100.0])) == {("i", "j"): 1.0}


def test_asymmetric_directions_average_raw_values():
    segs = [("i>j", "i", "j", 100.0, 10.0), ("j>i", "j", "i", 200.0, 10.0)] + two_way("j", "k", 100.0, 10.0)
    net = make_network(segs, {
        "i": [[("j>i", "i>j")]],
        "j": [[("i>j", "j>k"), ("k>j", "j>i")]],
        "k": [[("j>k", "k>j")]],
    })
    # raw i-j is (0.1 + 0.05) / 2 = 0.075 against 0.1 for j-k
    assert compute_B(net) == pytest.approx({("i", "j"): 0.75, ("j", "k"): 1.0}, abs=1e-15)


def test_parallel_segments_use_fastest():
    segs = two_way("i", "j", 100.0, 10.0) + [("i>j slow", "i", "j", 400.0, 10.0)] + two_way("j", "k", 100.0, 5.0)
    modes = {
        "i": [[("j>i", "i>j")]],
        "j": [[("i>j", "j>k"), ("k>j", "j>i")]],
        "k": [[("j>k", "k>j")]],
    }
    B = compute_B(make_network(segs, modes))
    assert B == {("i", "j"): 1.0, ("j", "k"): 0.5}


def test_B_ignores_unsignalized_neighbours():
    net = corridor()
    assert set(compute_B(net)) == {("n0_0", "n0_1"), ("n0_1", "n0_2")}


# ---------------------------------------------------------------- R


def test_R_pair_only_through_modes_compatible():
    R = compute_R(coupled_pair())
    assert R[("I", 1), ("J", 1)] == 2
    assert R[("I", 0), ("J", 0)] == 0
    assert R[("I", 0), ("J", 1)] == 0
    assert R[("I", 1), ("J", 0)] == 0


def fig2_pair():
    """i north of j on a north-south road, each with an east-west cross street."""
    segs = (two_way("ni", "i") + two_way("i", "j") + two_way("j", "sj")
            + two_way("wi", "i") + two_way("i", "ei") + two_way("wj", "j") + two_way("j", "ej"))
    modes = {
        "i": [
            [("ni>i", "i>j"), ("j>i", "i>ni")],
            [("wi>i", "i>ei"), ("ei>i", "i>wi")],
        ],
        "j": [
            [("i>j", "j>sj"), ("sj>j", "j>i")],
            # east-west green including a left turn up toward i
            [("wj>j", "j>ej"), ("ej>j", "j>wj"), ("ej>j", "j>i")],
        ],
    }
    return make_network(segs, modes)


def test_R_north_south_both_green_is_two():
    assert compute_R(fig2_pair())[("i", 0), ("j", 0)] == 2


def test_R_one_direction_only_is_one():
    assert compute_R(fig2_pair())[("i", 0), ("j", 1)] == 1


def test_R_neither_direction_is_zero():
    assert compute_R(fig2_pair())[("i", 1), ("j", 0)] == 0


def test_R_symmetric_and_non_adjacent_absent():
    net = corridor(3)
    R = compute_R(net)
    for ((i, m), (j, n)), v in R.items():
        assert R[(j, n), (i, m)] == v
        assert v in (0, 1, 2)
    assert not any(i == "n0_0" and j == "n0_2" for (i, _), (j, _) in R)


def test_R_and_B_match_oracle_on_random_networks():
    import numpy as np

    rng = np.random.default_rng(5)
    for _ in range(25):
        net = random_network(rng, int(rng.integers(2, 8)), max_modes=3, unsignalized_fraction=0.2)
        B_ref, R_ref, _, _ = tables_from_doc(net.to_dict())
        R = compute_R(net)
        assert {(i, m, j, n): v for ((i, m), (j, n)), v in R.items()} == R_ref
        B = compute_B(net)
        assert {frozenset(p): v for p, v in B.items()} == pytest.approx(B_ref)


# ---------------------------------------------------------------- validation and IO


def test_validate_clean_corridor():
    assert validate(corridor(2)) == []


def test_validate_zero_length():
    net = make_network([("i>j", "i", "j", 0.0, 10.0)], {})
    problems = validate(net)
    assert any("segment length must be positive" in p for p in problems)


def test_validate_approach_not_ending_at_owner():
    segs = two_way("i", "j") + two_way("x", "i")
    net = make_network(segs, {"i": [[("i>j", "i>x")]]})
    problems = validate(net)
    assert any("approach i>j does not end at i" in p for p in problems)


def test_validate_reports_other_invariants():
    segs = two_way("i", "j") + [("loop", "j", "j", 10.0, 1.0), ("far", "j", "zz", 10.0, 0.0)]
    net = make_network(segs, {"i": [[("j>i", "i>j")], [("j>i", "i>j")]], "j": []})
    text = "\n".join(validate(net))
    assert "identical movements" in text
    assert "endpoints must differ" in text
    assert "speed limit must be positive" in text
    assert "needs at least one mode" in text


def test_B_rejects_invalid_network():
    net = make_network([("i>j", "i", "j", -1.0, 10.0)], {})
    with pytest.raises(NetworkError):
        compute_B(net)


def test_json_round_trip(tmp_path):
    net = benchmark_grid()
    path = tmp_path / "net.json"
    dump_network(net, path)
    again = load_network(path)
    assert again.to_dict() == net.to_dict()


def test_unknown_keys_rejected():
    doc = corridor(1).to_dict()
    doc["segments"][0]["lanes"] = 2
    with pytest.raises(NetworkError, match="lanes"):
        RoadNetwork.from_dict(doc)
    doc = corridor(1).to_dict()
    doc["extra"] = 1
    with pytest.raises(NetworkError):
        RoadNetwork.from_dict(doc)


def test_duplicate_ids_rejected():
    doc = corridor(1).to_dict()
    doc["segments"].append(dict(doc["segments"][0]))
    with pytest.raises(NetworkError, match="duplicate"):
        RoadNetwork.from_dict(doc)


def test_adjacency_symmetric():
    net = benchmark_grid()
    for i, nbrs in net.adjacency.items():
        for j in nbrs:
            assert i in net.adjacency[j]


# ---------------------------------------------------------------- shipped networks


@pytest.mark.parametrize("name,builder", [
    ("benchmark", benchmark_grid),
    ("corridor", corridor),
    ("single", single_intersection),
])
def test_shipped_json_matches_builder(name, builder):
    assert name in BUILTIN_NETWORKS
    assert builtin(name).to_dict() == json.loads(json.dumps(builder().to_dict()))


def test_benchmark_shape():
    net = benchmark_grid()
    assert validate(net) == []
    assert net.num_variables == 100
    counts = [net.intersections[i].num_modes for i in net.signalized]
    assert set(counts) >= {2, 3}
    degrees = [len(net.adjacency[i]) for i in net.signalized]
    assert 3 in degrees and 5 in degrees  # T-junctions and the five-way node


def test_single_intersection_variables():
    assert single_intersection().num_variables == 2
    assert corridor().num_variables == 6


def test_builtin_unknown_name():
    with pytest.raises(KeyError):
        builtin("nowhere")
