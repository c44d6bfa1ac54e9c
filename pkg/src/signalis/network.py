"""Road networks made of intersections, directed segments and signal modes.

A *mode* is a set of movements (approach segment -> exit segment) that get
green together. Only signalized intersections carry decision variables; the
structural coefficient tables (connectivity ``B`` and compatibility ``R``)
depend on the map alone and are computed once per network.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

__all__ = [
    "Segment",
    "Movement",
    "Mode",
    "Intersection",
    "RoadNetwork",
    "CoefficientTables",
    "NetworkError",
    "validate",
    "compute_B",
    "compute_R",
    "compute_tables",
    "load_network",
    "dump_network",
]


class NetworkError(ValueError):
    """Raised for malformed network documents or invalid networks."""


@dataclass(frozen=True)
class Segment:
    id: str
    source: str
    target: str
    length: float
    speed_limit: float

    @property
    def travel_time(self) -> float:
        return self.length / self.speed_limit


@dataclass(frozen=True, order=True)
class Movement:
    approach: str
    exit: str


@dataclass(frozen=True)
class Mode:
    index: int
    movements: frozenset[Movement]


@dataclass(frozen=True)
class Intersection:
    id: str
    modes: tuple[Mode, ...] = ()
    signalized: bool = True

    @property
    def num_modes(self) -> int:
        return len(self.modes)


@dataclass
class RoadNetwork:
    intersections: dict[str, Intersection]
    segments: dict[str, Segment]

    @classmethod
    def build(
        cls,
        intersections: Iterable[Intersection],
        segments: Iterable[Segment],
    ) -> "RoadNetwork":
        inters: dict[str, Intersection] = {}
        for node in intersections:
            if node.id in inters:
                raise NetworkError(f"duplicate intersection id {node.id!r}")
            inters[node.id] = node
        segs: dict[str, Segment] = {}
        for seg in segments:
            if seg.id in segs:
                raise NetworkError(f"duplicate segment id {seg.id!r}")
            segs[seg.id] = seg
        return cls(inters, segs)

    @cached_property
    def adjacency(self) -> dict[str, frozenset[str]]:
        """Undirected neighbour sets: j in N_i iff some segment joins i and j."""
        nbrs: dict[str, set[str]] = {i: set() for i in self.intersections}
        for seg in self.segments.values():
            if seg.source == seg.target:
                continue
            nbrs.setdefault(seg.source, set()).add(seg.target)
            nbrs.setdefault(seg.target, set()).add(seg.source)
        return {i: frozenset(v) for i, v in nbrs.items()}

    @cached_property
    def incoming(self) -> dict[str, tuple[str, ...]]:
        inc: dict[str, list[str]] = {i: [] for i in self.intersections}
        for sid in sorted(self.segments):
            inc.setdefault(self.segments[sid].target, []).append(sid)
        return {i: tuple(v) for i, v in inc.items()}

    @cached_property
    def outgoing(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {i: [] for i in self.intersections}
        for sid in sorted(self.segments):
            out.setdefault(self.segments[sid].source, []).append(sid)
        return {i: tuple(v) for i, v in out.items()}

    @property
    def signalized(self) -> list[str]:
        """Ids of signalized intersections, sorted."""
        return sorted(i for i, node in self.intersections.items() if node.signalized)

    @property
    def num_variables(self) -> int:
        return sum(self.intersections[i].num_modes for i in self.signalized)

    def to_dict(self) -> dict:
        return {
            "intersections": [
                {
                    "id": node.id,
                    "signalized": node.signalized,
                    "modes": [
                        [
                            {"approach": mv.approach, "exit": mv.exit}
                            for mv in sorted(mode.movements)
                        ]
                        for mode in node.modes
                    ],
                }
                for node in sorted(self.intersections.values(), key=lambda n: n.id)
            ],
            "segments": [
                {
                    "id": s.id,
                    "from": s.source,
                    "to": s.target,
                    "length_m": s.length,
                    "speed_limit_mps": s.speed_limit,
                }
                for s in sorted(self.segments.values(), key=lambda s: s.id)
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "RoadNetwork":
        _check_keys(doc, {"intersections", "segments"}, "network")
        segments = []
        for raw in doc["segments"]:
            _check_keys(raw, {"id", "from", "to", "length_m", "speed_limit_mps"}, "segment")
            segments.append(
                Segment(
                    id=str(raw["id"]),
                    source=str(raw["from"]),
                    target=str(raw["to"]),
                    length=float(raw["length_m"]),
                    speed_limit=float(raw["speed_limit_mps"]),
                )
            )
        intersections = []
        for raw in doc["intersections"]:
            _check_keys(raw, {"id", "signalized", "modes"}, "intersection", optional={"signalized", "modes"})
            modes = []
            for m, raw_mode in enumerate(raw.get("modes", [])):
                movements = []
                for raw_mv in raw_mode:
                    _check_keys(raw_mv, {"approach", "exit"}, "movement")
                    movements.append(Movement(str(raw_mv["approach"]), str(raw_mv["exit"])))
                modes.append(Mode(m, frozenset(movements)))
            intersections.append(
                Intersection(
                    id=str(raw["id"]),
                    modes=tuple(modes),
                    signalized=bool(raw.get("signalized", True)),
                )
            )
        return cls.build(intersections, segments)


def _check_keys(raw: Mapping, allowed: set[str], what: str, optional: set[str] = frozenset()) -> None:
    if not isinstance(raw, Mapping):
        raise NetworkError(f"{what} entry must be an object, got {type(raw).__name__}")
    unknown = set(raw) - allowed
    if unknown:
        raise NetworkError(f"unknown {what} keys: {sorted(unknown)}")
    missing = allowed - optional - set(raw)
    if missing:
        raise NetworkError(f"{what} missing keys: {sorted(missing)}")


def load_network(path: str | Path) -> RoadNetwork:
    with open(path, encoding="utf-8") as fh:
        return RoadNetwork.from_dict(json.load(fh))


def dump_network(network: RoadNetwork, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network.to_dict(), fh, indent=1)
        fh.write("\n")


def validate(network: RoadNetwork) -> list[str]:
    """Return a list of human-readable invariant violations (empty if usable)."""
    problems: list[str] = []
    for sid in sorted(network.segments):
        seg = network.segments[sid]
        if not seg.length > 0:
            problems.append(f"segment {sid}: segment length must be positive")
        if not seg.speed_limit > 0:
            problems.append(f"segment {sid}: segment speed limit must be positive")
        if seg.source == seg.target:
            problems.append(f"segment {sid}: endpoints must differ")
        for end in (seg.source, seg.target):
            if end not in network.intersections:
                problems.append(f"segment {sid}: unknown intersection {end!r}")

    for iid in sorted(network.intersections):
        node = network.intersections[iid]
        if node.signalized and not node.modes:
            problems.append(f"intersection {iid}: signalized intersection needs at least one mode")
        seen: dict[frozenset[Movement], int] = {}
        for pos, mode in enumerate(node.modes):
            if mode.index != pos:
                problems.append(f"intersection {iid}: mode at position {pos} has index {mode.index}")
            if not mode.movements:
                problems.append(f"intersection {iid} mode {mode.index}: mode has no movements")
            if mode.movements in seen:
                problems.append(
                    f"intersection {iid}: modes {seen[mode.movements]} and {mode.index} "
                    "have identical movements"
                )
            seen.setdefault(mode.movements, mode.index)
            for mv in sorted(mode.movements):
                app = network.segments.get(mv.approach)
                ext = network.segments.get(mv.exit)
                if app is None:
                    problems.append(f"intersection {iid} mode {mode.index}: unknown approach segment {mv.approach!r}")
                elif app.target != iid:
                    problems.append(
                        f"intersection {iid} mode {mode.index}: approach {mv.approach} does not end at {iid}"
                    )
                if ext is None:
                    problems.append(f"intersection {iid} mode {mode.index}: unknown exit segment {mv.exit!r}")
                elif ext.source != iid:
                    problems.append(
                        f"intersection {iid} mode {mode.index}: exit {mv.exit} does not start at {iid}"
                    )
    return problems


def _require_valid(network: RoadNetwork) -> None:
    problems = validate(network)
    if problems:
        raise NetworkError("invalid network: " + "; ".join(problems))


def _pair(i: str, j: str) -> tuple[str, str]:
    return (i, j) if i <= j else (j, i)


def compute_B(network: RoadNetwork) -> dict[tuple[str, str], float]:
    """Inverse travel time between adjacent signalized intersections, max-scaled to 1.

    Per direction the fastest connecting segment is used; when both directions
    exist the two raw values are averaged. Keys are sorted id pairs.
    """
    _require_valid(network)
    signalized = set(network.signalized)
    best: dict[tuple[str, str], float] = {}
    for seg in network.segments.values():
        if seg.source not in signalized or seg.target not in signalized:
            continue
        key = (seg.source, seg.target)
        best[key] = max(best.get(key, 0.0), seg.speed_limit / seg.length)

    raw: dict[tuple[str, str], float] = {}
    for (i, j), fwd in best.items():
        pair = _pair(i, j)
        if pair in raw:
            continue
        back = best.get((j, i))
        raw[pair] = fwd if back is None else 0.5 * (fwd + back)
    if not raw:
        return {}
    top = max(raw.values())
    return {pair: value / top for pair, value in sorted(raw.items())}


def compute_R(network: RoadNetwork) -> dict[tuple[tuple[str, int], tuple[str, int]], int]:
    """Compatibility of mode pairs on adjacent signalized intersections.

    Travel i -> j is possible under (m, n) when mode m at i releases some
    movement onto a segment that ends at j and mode n at j releases some
    movement arriving from i. The value counts the passable directions.
    Both orderings of every pair are stored.
    """
    _require_valid(network)
    segs = network.segments
    signalized = network.signalized
    sig_set = set(signalized)

    # toward[i][m]: neighbours reachable from i under mode m
    # from_[j][n]: neighbours whose traffic is released at j under mode n
    toward: dict[str, list[set[str]]] = {}
    from_: dict[str, list[set[str]]] = {}
    for i in signalized:
        node = network.intersections[i]
        toward[i] = [{segs[mv.exit].target for mv in mode.movements} for mode in node.modes]
        from_[i] = [{segs[mv.approach].source for mv in mode.movements} for mode in node.modes]

    table: dict[tuple[tuple[str, int], tuple[str, int]], int] = {}
    for i in signalized:
        for j in sorted(network.adjacency[i]):
            if j not in sig_set:
                continue
            for m, (out_i, in_i) in enumerate(zip(toward[i], from_[i])):
                for n, (out_j, in_j) in enumerate(zip(toward[j], from_[j])):
                    i_to_j = j in out_i and i in in_j
                    j_to_i = i in out_j and j in in_i
                    table[(i, m), (j, n)] = int(i_to_j) + int(j_to_i)
    return table


@dataclass(frozen=True)
class CoefficientTables:
    B: dict[tuple[str, str], float] = field(default_factory=dict)
    R: dict[tuple[tuple[str, int], tuple[str, int]], int] = field(default_factory=dict)

    def connectivity(self, i: str, j: str) -> float:
        return self.B.get(_pair(i, j), 0.0)


def compute_tables(network: RoadNetwork) -> CoefficientTables:
    return CoefficientTables(B=compute_B(network), R=compute_R(network))
