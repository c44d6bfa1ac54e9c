import pytest

from signalis.network import Intersection, Mode, Movement, RoadNetwork, Segment


def make_network(segments, modes, unsignalized=()):
    """Network from ``(id, from, to, length, speed)`` tuples and per-node mode lists.

    ``modes[i]`` is a list of modes, each a list of ``(approach, exit)``
    pairs. Every endpoint not in ``modes`` becomes an unsignalized node.
    """
    segs = [Segment(*s) for s in segments]
    nodes = {s.source for s in segs} | {s.target for s in segs} | set(modes)
    out = []
    for n in sorted(nodes):
        if n in modes and n not in unsignalized:
            out.append(Intersection(n, tuple(
                Mode(k, frozenset(Movement(a, e) for a, e in mv)) for k, mv in enumerate(modes[n])
            )))
        else:
            out.append(Intersection(n, (), False))
    return RoadNetwork.build(out, segs)


def two_way(a, b, length=100.0, speed=10.0):
    return [(f"{a}>{b}", a, b, length, speed), (f"{b}>{a}", b, a, length, speed)]


def coupled_pair(length=100.0, speed=10.0):
    """Intersections I (west) and J (east) joined by a two-way link.

    Mode 0 at each node serves its own north-south stubs; mode 1 serves the
    east-west axis through the link, so only (I1, J1) are compatible, in
    both directions.
    """
    segs = (two_way("a", "I") + two_way("I", "b") + two_way("w", "I")
            + two_way("I", "J", length, speed)
            + two_way("c", "J") + two_way("J", "d") + two_way("J", "e"))
    modes = {
        "I": [[("a>I", "I>b"), ("b>I", "I>a")], [("w>I", "I>J"), ("J>I", "I>w")]],
        "J": [[("c>J", "J>d"), ("d>J", "J>c")], [("I>J", "J>e"), ("e>J", "J>I")]],
    }
    return make_network(segs, modes)


def one_way_line(first=100.0, second=200.0, speed=10.0):
    """A -> I -> B one-way, plus a side approach C -> I; I has two modes."""
    segs = [
        ("A>I", "A", "I", first, speed),
        ("C>I", "C", "I", first, speed),
        ("I>B", "I", "B", second, speed),
    ]
    modes = {"I": [[("A>I", "I>B")], [("C>I", "I>B")]]}
    return make_network(segs, modes)


@pytest.fixture
def pair():
    return coupled_pair()


@pytest.fixture
def line():
    return one_way_line()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
