"""Synthetic road networks: corridors, grids and random test instances.

Signal modes on geometric networks are synthesized from approach headings:
one mode per approach axis (north-south, east-west, diagonal), with an
optional protected-turn split of the north-south phase. Boundary stubs end
at unsignalized terminal nodes, which is where vehicles enter and leave.
"""
from __future__ import annotations

import math
from importlib import resources

import numpy as np

from .network import Intersection, Mode, Movement, RoadNetwork, Segment, load_network

__all__ = [
    "grid_network",
    "corridor",
    "single_intersection",
    "benchmark_grid",
    "random_network",
    "builtin",
    "BUILTIN_NETWORKS",
]


def _node(r: int, c: int) -> str:
    return f"n{r}_{c}"


def _axis(dx: float, dy: float) -> str:
    if abs(dx) < 1e-9:
        return "ns"
    if abs(dy) < 1e-9:
        return "ew"
    return "diag"


def _turn(hx, hy, ox, oy) -> str:
    """Classify a movement by the signed angle from incoming to outgoing heading.

    Coordinates are screen-like (y grows southward), so a positive cross
    product is a clockwise, i.e. right, turn.
    """
    ang = math.degrees(math.atan2(hx * oy - hy * ox, hx * ox + hy * oy))
    if abs(ang) < 30:
        return "straight"
    return "right" if ang > 0 else "left"


def _synthesize_modes(node, pos, incoming, outgoing, protected_turn=False):
    """Modes for one node from the geometry of its approaches."""
    x0, y0 = pos[node]
    groups: dict[str, list[Movement]] = {"ns": [], "ew": [], "diag": []}
    turns: dict[Movement, str] = {}
    for a_id, a_src in incoming:
        ax, ay = pos[a_src]
        hx, hy = x0 - ax, y0 - ay
        exits = [(e_id, e_dst) for e_id, e_dst in outgoing if e_dst != a_src] or list(outgoing)
        for e_id, e_dst in exits:
            ex, ey = pos[e_dst]
            mv = Movement(a_id, e_id)
            groups[_axis(hx, hy)].append(mv)
            turns[mv] = _turn(hx, hy, ex - x0, ey - y0)
    phases = [frozenset(groups[k]) for k in ("ns", "ew", "diag") if groups[k]]
    if len(phases) == 1:
        by_approach: dict[str, list[Movement]] = {}
        for mv in phases[0]:
            by_approach.setdefault(mv.approach, []).append(mv)
        phases = [frozenset(v) for _, v in sorted(by_approach.items())]
    if protected_turn and groups["ns"] and len(phases) >= 2:
        # left-hand traffic: right turns cross the opposing stream
        ns = groups["ns"]
        crossing = frozenset(mv for mv in ns if turns[mv] == "right")
        if crossing and len(crossing) < len(ns):
            near = frozenset(mv for mv in ns if turns[mv] == "left")
            phases[0] = frozenset(ns) - crossing
            phases.insert(1, crossing | near)
    return tuple(Mode(m, movements) for m, movements in enumerate(phases))


def _assemble(pos, links, signalized, protected=()):
    """Build a network from node positions and undirected links (a, b, speed)."""
    segments = []
    for a, b, speed in links:
        length = round(math.dist(pos[a], pos[b]), 3)
        segments.append(Segment(f"{a}>{b}", a, b, length, speed))
        segments.append(Segment(f"{b}>{a}", b, a, length, speed))
    incoming: dict[str, list] = {n: [] for n in pos}
    outgoing: dict[str, list] = {n: [] for n in pos}
    for s in sorted(segments, key=lambda s: s.id):
        incoming[s.target].append((s.id, s.source))
        outgoing[s.source].append((s.id, s.target))
    nodes = []
    for n in sorted(pos):
        if n in signalized:
            modes = _synthesize_modes(n, pos, incoming[n], outgoing[n], n in protected)
            nodes.append(Intersection(n, modes, True))
        else:
            nodes.append(Intersection(n, (), False))
    return RoadNetwork.build(nodes, segments)


def grid_network(
    xs,
    ys,
    stubs=None,
    protected=(),
    arterial_rows=(),
    arterial_cols=(),
    diagonal=None,
    stub_length=100.0,
    speed=11.1,
    arterial_speed=13.9,
) -> RoadNetwork:
    """Signalized grid at coordinates ``xs`` (columns) x ``ys`` (rows).

    ``stubs`` maps a boundary node ``(r, c)`` to the directions ('N', 'S',
    'E', 'W') of terminal stubs; the default puts a stub on every outward
    side. ``diagonal`` optionally attaches a fifth, diagonal approach to one
    node.
    """
    rows, cols = len(ys), len(xs)
    pos = {_node(r, c): (float(xs[c]), float(ys[r])) for r in range(rows) for c in range(cols)}
    signalized = set(pos)
    links = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                s = arterial_speed if r in arterial_rows else speed
                links.append((_node(r, c), _node(r, c + 1), s))
            if r + 1 < rows:
                s = arterial_speed if c in arterial_cols else speed
                links.append((_node(r, c), _node(r + 1, c), s))
    if stubs is None:
        stubs = {}
        for r in range(rows):
            for c in range(cols):
                sides = ("N" if r == 0 else "") + ("S" if r == rows - 1 else "")
                sides += ("W" if c == 0 else "") + ("E" if c == cols - 1 else "")
                if sides:
                    stubs[(r, c)] = sides
    offsets = {"N": (0, -1), "S": (0, 1), "W": (-1, 0), "E": (1, 0)}
    for (r, c), sides in sorted(stubs.items()):
        for side in sides:
            dx, dy = offsets[side]
            x, y = pos[_node(r, c)]
            t = f"t{r}_{c}{side}"
            pos[t] = (x + dx * stub_length, y + dy * stub_length)
            s = arterial_speed if (side in "WE" and r in arterial_rows) or (side in "NS" and c in arterial_cols) else speed
            links.append((_node(r, c), t, s))
    if diagonal is not None:
        (r, c), (dx, dy) = diagonal
        x, y = pos[_node(r, c)]
        t = f"t{r}_{c}D"
        pos[t] = (x + dx, y + dy)
        links.append((_node(r, c), t, speed))
    protected = {_node(r, c) for r, c in protected}
    if diagonal is not None:
        protected.discard(_node(*diagonal[0]))
    return _assemble(pos, links, signalized, protected)


def corridor(n: int = 3, spacing: float = 200.0) -> RoadNetwork:
    """East-west arterial of ``n`` signalized crossings, each with side streets."""
    return grid_network([spacing * c for c in range(n)], [0.0], arterial_rows=(0,))


def single_intersection() -> RoadNetwork:
    return grid_network([0.0], [0.0])


def benchmark_grid() -> RoadNetwork:
    """6 x 8 signalized grid, 100 binary variables.

    Mixed block lengths, two arterials, T-junctions on the top and bottom
    edges (stubs only at every other column), three protected-turn crossings
    and one five-way intersection with a diagonal approach.
    """
    xs = np.cumsum([0, 140, 190, 120, 170, 210, 150, 130]).tolist()
    ys = np.cumsum([0, 160, 120, 200, 140, 180]).tolist()
    rows, cols = len(ys), len(xs)
    stubs = {}
    for r in range(rows):
        for c in range(cols):
            sides = ""
            if r == 0 and c % 2 == 0:
                sides += "N"
            if r == rows - 1 and c % 2 == 1:
                sides += "S"
            if c == 0:
                sides += "W"
            if c == cols - 1:
                sides += "E"
            if sides:
                stubs[(r, c)] = sides
    return grid_network(
        xs,
        ys,
        stubs=stubs,
        protected=[(2, 3), (3, 5), (4, 1)],
        arterial_rows=(2,),
        arterial_cols=(5,),
        diagonal=((1, 2), (80.0, 80.0)),
    )


def random_network(rng: np.random.Generator, n_intersections: int, max_modes: int = 3,
                   unsignalized_fraction: float = 0.0) -> RoadNetwork:
    """Random connected network with random (valid) mode sets.

    Intersections sit on a small lattice; a random spanning tree plus a few
    extra links connects them, segments run both ways (occasionally one way)
    with random lengths and speeds, and each signalized node receives 1 to
    ``max_modes`` distinct random subsets of its movements.
    """
    side = max(1, math.ceil(math.sqrt(n_intersections)))
    cells = rng.permutation(side * side)[:n_intersections]
    ids = [f"i{k:02d}" for k in range(n_intersections)]
    coords = {ids[k]: divmod(int(cells[k]), side) for k in range(n_intersections)}

    order = list(rng.permutation(n_intersections))
    edges = set()
    for a_pos in range(1, n_intersections):
        a = ids[order[a_pos]]
        b = ids[order[int(rng.integers(0, a_pos))]]
        edges.add(tuple(sorted((a, b))))
    for _ in range(int(rng.integers(0, n_intersections))):
        a, b = rng.choice(n_intersections, size=2, replace=False)
        edges.add(tuple(sorted((ids[a], ids[b]))))

    speeds = (8.3, 11.1, 13.9, 16.7)
    segments = []
    for a, b in sorted(edges):
        base = 50.0 * (1 + math.dist(coords[a], coords[b]))
        length = float(np.round(base * rng.uniform(0.8, 2.5), 1))
        speed = float(rng.choice(speeds))
        direction = rng.random()
        if direction > 0.1:
            segments.append(Segment(f"{a}>{b}", a, b, length, speed))
        if direction < 0.1 or direction > 0.2:
            length_back = length if rng.random() < 0.7 else float(np.round(length * rng.uniform(0.8, 1.2), 1))
            segments.append(Segment(f"{b}>{a}", b, a, length_back, speed))

    nodes = []
    for i in ids:
        signalized = rng.random() >= unsignalized_fraction
        inc = [s for s in segments if s.target == i]
        out = [s for s in segments if s.source == i]
        movements = [Movement(a.id, e.id) for a in inc for e in out if e.target != a.source]
        if not movements:
            movements = [Movement(a.id, e.id) for a in inc for e in out]
        if not movements or not signalized:
            nodes.append(Intersection(i, (), False))
            continue
        want = int(rng.integers(1, max_modes + 1)) if max_modes > 1 else 1
        modes: list[frozenset[Movement]] = []
        for _ in range(20 * want):
            if len(modes) == want:
                break
            mask = rng.random(len(movements)) < 0.5
            subset = frozenset(mv for mv, keep in zip(movements, mask) if keep)
            if subset and subset not in modes:
                modes.append(subset)
        if not modes:
            modes.append(frozenset(movements))
        nodes.append(Intersection(i, tuple(Mode(m, mv) for m, mv in enumerate(modes)), True))
    return RoadNetwork.build(nodes, segments)


BUILTIN_NETWORKS = {
    "benchmark": "benchmark.json",
    "corridor": "corridor.json",
    "single": "single.json",
}


def builtin(name: str) -> RoadNetwork:
    """Load one of the networks shipped with the package."""
    if name not in BUILTIN_NETWORKS:
        raise KeyError(f"no built-in network {name!r}; choose from {sorted(BUILTIN_NETWORKS)}")
    ref = resources.files("signalis") / "data" / BUILTIN_NETWORKS[name]
    with resources.as_file(ref) as path:
        return load_network(path)
