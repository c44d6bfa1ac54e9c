"""Deterministic discrete-time traffic microsimulation with signal control in the loop.

Vehicles follow shortest-time routes between boundary terminals, queue
single file behind each other and behind red stop lines, and cross an
intersection at most once per ``headway`` seconds per approach. Every
``t_interval`` seconds an optimizing controller reads the vehicles waiting
near each stop line, solves the mode-selection QUBO and switches the
signals. Waiting time is the number of seconds a vehicle stands still while
its next movement is red.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from . import _kernel
from .network import RoadNetwork, compute_tables, load_network, validate
from .qubo import (
    DwellState,
    Hyperparameters,
    Qubo,
    TrafficCounts,
    VariableIndex,
    add_dwell_penalty,
    build_qubo,
    evaluate,
)
from .solvers import SaConfig, solve_exact, solve_local, solve_sa

__all__ = [
    "Scenario",
    "FixedCycle",
    "Static",
    "Optimized",
    "Controller",
    "SignalState",
    "Vehicle",
    "SimMetrics",
    "Topology",
    "topology_for",
    "World",
    "collect_counts",
    "fixed_cycle_mode",
    "census_first_order",
    "step",
    "run_simulation",
    "load_scenario",
    "resolve_network",
    "controller_from_dict",
    "recount_waiting",
]


# --------------------------------------------------------------------------
# static structure


class Topology:
    """Index arrays and shortest routes derived once from a network."""

    def __init__(self, network: RoadNetwork):
        problems = validate(network)
        if problems:
            raise ValueError("invalid network: " + "; ".join(problems))
        self.network = network
        self.index = VariableIndex.from_network(network)
        self.tables = compute_tables(network)

        self.seg_ids = sorted(network.segments)
        self.seg_pos = {sid: k for k, sid in enumerate(self.seg_ids)}
        segs = [network.segments[s] for s in self.seg_ids]
        self.seg_len = np.array([s.length for s in segs], dtype=float)
        self.seg_speed = np.array([s.speed_limit for s in segs], dtype=float)

        terminals = {i for i, nb in network.adjacency.items()
                     if len(nb) == 1 and not network.intersections[i].signalized}
        self.entries = np.array([k for k, s in enumerate(segs) if s.source in terminals], dtype=np.int64)
        self.exits = np.array([k for k, s in enumerate(segs) if s.target in terminals], dtype=np.int64)
        # initial vehicles may start anywhere that still leads somewhere
        self.starts = np.array([k for k, s in enumerate(segs) if s.target not in terminals], dtype=np.int64)

        moves: list[tuple[int, int]] = []
        node_of_move: list[str] = []
        for i in sorted(network.intersections):
            node = network.intersections[i]
            if node.signalized:
                pairs = sorted({(mv.approach, mv.exit) for mode in node.modes for mv in mode.movements})
            elif i in terminals:
                pairs = []
            else:
                pairs = [
                    (a, e)
                    for a in network.incoming[i]
                    for e in network.outgoing[i]
                    if network.segments[e].target != network.segments[a].source
                ]
            for a, e in pairs:
                moves.append((self.seg_pos[a], self.seg_pos[e]))
                node_of_move.append(i)
        self.moves = moves
        self.move_pos = {m: k for k, m in enumerate(moves)}

        # movement -> variables whose mode releases it
        rows, cols = [], []
        self.mode_moves: dict[tuple[str, int], np.ndarray] = {}
        self.node_moves: dict[str, np.ndarray] = {}
        for i in network.signalized:
            node = network.intersections[i]
            ids = set()
            for mode in node.modes:
                mids = sorted(self.move_pos[(self.seg_pos[mv.approach], self.seg_pos[mv.exit])]
                              for mv in mode.movements)
                self.mode_moves[(i, mode.index)] = np.array(mids, dtype=np.int64)
                ids.update(mids)
                k = self.index.var(i, mode.index)
                rows.extend(mids)
                cols.extend([k] * len(mids))
            self.node_moves[i] = np.array(sorted(ids), dtype=np.int64)
        self.move_vars = sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(len(moves), len(self.index))
        )

        # line graph: segment a -> segment e when movement (a, e) exists
        if moves:
            a_idx, e_idx = np.array(moves).T
        else:
            a_idx = e_idx = np.zeros(0, dtype=np.int64)
        graph = sp.csr_matrix(
            (self.seg_len[e_idx] / self.seg_speed[e_idx], (a_idx, e_idx)),
            shape=(len(segs), len(segs)),
        )
        self.dist, self.pred = dijkstra(graph, directed=True, return_predecessors=True)

    def route(self, origin: int, dest: int) -> list[int]:
        if not np.isfinite(self.dist[origin, dest]):
            raise ValueError(f"no route from {self.seg_ids[origin]} to {self.seg_ids[dest]}")
        path = [dest]
        while path[-1] != origin:
            path.append(int(self.pred[origin, path[-1]]))
        return path[::-1]


_TOPOLOGIES: dict[int, tuple[RoadNetwork, Topology]] = {}


def topology_for(network: RoadNetwork) -> Topology:
    hit = _TOPOLOGIES.get(id(network))
    if hit is not None and hit[0] is network:
        return hit[1]
    topo = Topology(network)
    _TOPOLOGIES[id(network)] = (network, topo)
    return topo


# --------------------------------------------------------------------------
# scenario and controllers


@dataclass(frozen=True)
class Scenario:
    network: RoadNetwork
    initial_vehicle_count: int = 200
    injection_rate: float = 2.0
    duration: int = 400
    t_interval: int = 5
    seed: int = 0
    detection_distance: float = 50.0
    spacing: float = 7.5
    headway: int = 2
    network_path: str | None = None

    def __post_init__(self):
        if self.duration % self.t_interval:
            raise ValueError("duration must be a multiple of t_interval")
        if self.initial_vehicle_count < 0 or self.injection_rate < 0:
            raise ValueError("vehicle counts must be nonnegative")


@dataclass(frozen=True)
class FixedCycle:
    cycle_s: float = 90.0
    name: str = "fixed"


@dataclass(frozen=True)
class Static:
    assignment: dict
    name: str = "static"


@dataclass(frozen=True)
class Optimized:
    """Re-optimize every interval with ``solver`` in {"exact", "sa", "local"}.

    With ``reference`` the exact optimum is also computed at every step so
    the relative energy error of the applied solution can be reported.
    ``crossing_time`` enables the pedestrian dwell penalty. With
    ``hold_ties`` an intersection with no detected vehicles keeps its current
    mode whenever that leaves the energy unchanged.
    """

    solver: str = "exact"
    params: Hyperparameters = Hyperparameters()
    sa: SaConfig = SaConfig()
    reference: bool = False
    crossing_time: float | None = None
    hold_ties: bool = True

    def __post_init__(self):
        if self.solver not in ("exact", "sa", "local"):
            raise ValueError(f"unknown solver {self.solver!r}")

    @property
    def name(self) -> str:
        return self.solver


Controller = Union[FixedCycle, Static, Optimized]


def fixed_cycle_mode(t: float, num_modes: int, cycle: float = 90.0) -> int:
    if t < 0:
        raise ValueError("time must be nonnegative")
    split = cycle / num_modes
    return min(int((t % cycle) // split), num_modes - 1)


@dataclass
class SignalState:
    current_mode: dict[str, int]
    held_since: dict[str, int]

    @classmethod
    def initial(cls, network: RoadNetwork) -> "SignalState":
        ids = network.signalized
        return cls({i: 0 for i in ids}, {i: 0 for i in ids})

    def apply(self, selected: dict[str, int], t: int) -> int:
        """Switch to ``selected``; returns how many intersections changed mode."""
        changed = 0
        for i, m in selected.items():
            if self.current_mode.get(i) != m:
                self.current_mode[i] = m
                self.held_since[i] = t
                changed += 1
        return changed


# --------------------------------------------------------------------------
# world state


@dataclass(frozen=True)
class Vehicle:
    id: int
    route: tuple[str, ...]
    position: tuple[str, float] | None
    state: str
    waiting_seconds: int


_STATES = {0: "unloaded", _kernel.PENDING: "pending", _kernel.ON_ROAD: "moving", _kernel.ARRIVED: "arrived"}


class World:
    """Vehicles and queues for one scenario. All randomness is drawn up front."""

    def __init__(self, scenario: Scenario, topology: Topology | None = None):
        self.scenario = scenario
        self.topo = topo = topology or topology_for(scenario.network)
        if topo.entries.size == 0 or topo.exits.size == 0:
            raise ValueError("network has no boundary terminals to route vehicles between")
        init_ss, inject_ss = np.random.SeedSequence(scenario.seed).spawn(2)
        rng_init = np.random.default_rng(init_ss)
        rng_inject = np.random.default_rng(inject_ss)

        n_init = scenario.initial_vehicle_count
        per_tick = [
            math.floor(scenario.injection_rate * (t + 1)) - math.floor(scenario.injection_rate * t)
            for t in range(scenario.duration)
        ]
        n_total = n_init + sum(per_tick)

        route_seg: list[int] = []
        route_move: list[int] = []
        self.first = np.zeros(n_total, dtype=np.int64)
        self.last = np.zeros(n_total, dtype=np.int64)
        offsets = np.zeros(n_init)
        for v in range(n_total):
            rng = rng_init if v < n_init else rng_inject
            segs = self._draw_route(rng, initial=v < n_init)
            if v < n_init:
                offsets[v] = rng.uniform(0.0, topo.seg_len[segs[0]])
            self.first[v] = len(route_seg)
            route_seg.extend(segs)
            route_move.extend(topo.move_pos[(a, e)] for a, e in zip(segs, segs[1:]))
            route_move.append(-1)
            self.last[v] = len(route_seg) - 1
        self.route_seg = np.array(route_seg, dtype=np.int64)
        self.route_move = np.array(route_move, dtype=np.int64)

        n_seg = len(topo.seg_ids)
        self.head = np.full(n_seg, -1, dtype=np.int64)
        self.tail = np.full(n_seg, -1, dtype=np.int64)
        self.pend_head = np.full(n_seg, -1, dtype=np.int64)
        self.pend_tail = np.full(n_seg, -1, dtype=np.int64)
        self.last_cross = np.full(n_seg, -(10**9), dtype=np.int64)
        self.pos = np.zeros(n_total)
        self.prev = np.zeros(n_total)
        self.seg = self.route_seg[self.first].copy()
        self.ptr = self.first.copy()
        self.nxt = np.full(n_total, -1, dtype=np.int64)
        self.state = np.zeros(n_total, dtype=np.int8)
        self.waiting = np.zeros(n_total, dtype=np.int64)
        self.stamp = np.full(n_total, -1, dtype=np.int64)
        self.red = np.zeros(n_total, dtype=np.int8)
        self.perm = np.ones(len(topo.moves), dtype=np.bool_)

        self.t = 0
        self.arrived = 0
        self.loaded = 0
        self._schedule = np.cumsum([n_init] + per_tick)
        self._place_initial(offsets)

    def _draw_route(self, rng: np.random.Generator, initial: bool) -> list[int]:
        topo = self.topo
        pool = topo.starts if initial else topo.entries
        for _ in range(1000):
            origin = int(pool[rng.integers(pool.size)])
            dest = int(topo.exits[rng.integers(topo.exits.size)])
            if origin == dest or not np.isfinite(topo.dist[origin, dest]):
                continue
            return topo.route(origin, dest)
        raise RuntimeError("could not draw a routable origin/destination pair")

    def _place_initial(self, offsets: np.ndarray) -> None:
        n_init = offsets.size
        spacing = self.scenario.spacing
        order = sorted(range(n_init), key=lambda v: (int(self.seg[v]), -offsets[v], v))
        last_seg, limit = -1, math.inf
        for v in order:
            s = int(self.seg[v])
            if s != last_seg:
                last_seg, limit = s, self.topo.seg_len[s]
            p = min(offsets[v], limit)
            if p < 0:
                self._enqueue(v)
                continue
            self.pos[v] = p
            self.state[v] = _kernel.ON_ROAD
            _kernel._push(self.head, self.tail, self.nxt, s, v)
            limit = p - spacing
        self.loaded = n_init

    def _enqueue(self, v: int) -> None:
        self.state[v] = _kernel.PENDING
        _kernel._push(self.pend_head, self.pend_tail, self.nxt, int(self.seg[v]), v)

    def load_injections(self) -> list[int]:
        """Queue this tick's new vehicles at their entry segments."""
        upto = int(self._schedule[self.t + 1]) if self.t + 1 < self._schedule.size else self.loaded
        new = list(range(self.loaded, upto))
        for v in new:
            self._enqueue(v)
        self.loaded = upto
        return new

    def set_signals(self, signals: SignalState) -> None:
        topo = self.topo
        for i, m in signals.current_mode.items():
            self.perm[topo.node_moves[i]] = False
            self.perm[topo.mode_moves[(i, m)]] = True

    def advance(self) -> tuple[int, int]:
        arrived, at_red = _kernel.tick(
            self.t,
            self.topo.seg_len,
            self.topo.seg_speed,
            self.head,
            self.tail,
            self.pend_head,
            self.pend_tail,
            self.last_cross,
            self.pos,
            self.prev,
            self.seg,
            self.ptr,
            self.last,
            self.nxt,
            self.state,
            self.waiting,
            self.stamp,
            self.red,
            self.route_seg,
            self.route_move,
            self.perm,
            self.scenario.spacing,
            self.scenario.headway,
        )
        self.arrived += arrived
        self.t += 1
        return arrived, at_red

    @property
    def on_map(self) -> int:
        return int(np.count_nonzero((self.state == _kernel.ON_ROAD) | (self.state == _kernel.PENDING)))

    def vehicle(self, v: int) -> Vehicle:
        segs = tuple(self.topo.seg_ids[s] for s in self.route_seg[self.first[v]: self.last[v] + 1])
        on_road = self.state[v] == _kernel.ON_ROAD
        state = _STATES[int(self.state[v])]
        if on_road and self.red[v]:
            state = "queued"
        position = (self.topo.seg_ids[int(self.seg[v])], float(self.pos[v])) if on_road else None
        return Vehicle(v, segs, position, state, int(self.waiting[v]))


def step(world: World, signals: SignalState, dt: float = 1.0) -> World:
    """Advance the world by one tick under ``signals`` (dt is fixed at 1 s)."""
    if dt != 1.0:
        raise ValueError("the simulator runs at dt = 1 s")
    world.load_injections()
    world.set_signals(signals)
    world.advance()
    return world


def collect_counts(world: World, network: RoadNetwork | None = None) -> TrafficCounts:
    """Vehicles within the detection zone of each signalized stop line, per permitting mode."""
    topo = world.topo
    vec = _count_vector(world)
    return TrafficCounts({key: float(c) for key, c in zip(topo.index.keys, vec) if c})


def _count_vector(world: World) -> np.ndarray:
    topo = world.topo
    on = np.flatnonzero(world.state == _kernel.ON_ROAD)
    if on.size == 0 or len(topo.moves) == 0:
        return np.zeros(len(topo.index))
    s = world.seg[on]
    near = (topo.seg_len[s] - world.pos[on]) <= world.scenario.detection_distance
    moving_on = world.ptr[on] < world.last[on]
    sel = on[near & moving_on]
    mv = world.route_move[world.ptr[sel]]
    per_move = np.bincount(mv, minlength=len(topo.moves)).astype(float)
    return np.asarray(topo.move_vars.T @ per_move).ravel()


def census_first_order(qubo: Qubo) -> tuple[int, int]:
    """(zero, nonzero) count of the throughput coefficients."""
    if qubo.first_order is None:
        raise ValueError("qubo does not track its first-order throughput terms")
    nonzero = int(np.count_nonzero(qubo.first_order))
    return qubo.num_vars - nonzero, nonzero


# --------------------------------------------------------------------------
# closed loop


@dataclass
class SimMetrics:
    total_waiting_s: float = 0.0
    vehicles_arrived: int = 0
    vehicles_loaded: int = 0
    on_map: int = 0
    optimizer_calls: int = 0
    signal_switches: int = 0
    per_step_energy: list[float] = field(default_factory=list)
    per_step_optimum: list[float] = field(default_factory=list)
    per_step_rel_error: list[float] = field(default_factory=list)
    first_order_zero: list[int] = field(default_factory=list)
    first_order_nonzero: list[int] = field(default_factory=list)
    solver_ms: list[float] = field(default_factory=list)
    queued_per_tick: list[int] = field(default_factory=list)
    vehicle_waiting: np.ndarray | None = None

    def comparable(self) -> dict:
        """Everything except wall-clock timings."""
        out = {k: v for k, v in self.__dict__.items() if k not in ("solver_ms", "vehicle_waiting")}
        out["vehicle_waiting"] = None if self.vehicle_waiting is None else self.vehicle_waiting.tolist()
        return out


def _relative_error(energy: float, optimum: float) -> float:
    if optimum == 0:
        return 0.0 if energy == optimum else math.nan
    return (energy - optimum) / abs(optimum)


def _dwell_state(t: int, signals: SignalState, topo: Topology, crossing: float) -> DwellState:
    """Dwell times for the pedestrian penalty.

    While the showing mode is younger than the crossing time, it carries its
    age and every other mode counts as just started (tau = 0). Once the
    crossing time has passed the intersection is released: every mode gets
    tau = T and no penalty, otherwise the controller could never switch again.
    """
    tau = {}
    for i, m in signals.current_mode.items():
        held = float(t - signals.held_since[i])
        if held < crossing:
            tau[(i, m)] = held
        else:
            tau.update({(i, n): crossing for n in range(len(topo.index.group(i)))})
    return DwellState(tau, {i: crossing for i in topo.index.intersections})


def _hold_ties(qubo: Qubo, index, selected: dict, energy: float, current: dict):
    """Let idle intersections keep their current mode wherever that costs nothing.

    An intersection is idle when none of its modes has a detected vehicle,
    the same case in which the local controller holds. Only exactly equal
    energies are accepted, so an optimum stays an optimum.
    """
    selected = dict(selected)
    first = qubo.first_order
    for i in index.intersections:
        m = current.get(i)
        if m is None or selected[i] == m:
            continue
        if first is not None and np.any(first[list(index.group(i))] != 0):
            continue
        trial = dict(selected)
        trial[i] = m
        if evaluate(qubo, index.encode(trial)) == energy:
            selected = trial
    return selected, energy


def _optimize(world: World, signals: SignalState, controller: Optimized, step_index: int,
              metrics: SimMetrics) -> dict[str, int]:
    topo = world.topo
    network = topo.network
    counts = collect_counts(world)
    qubo = build_qubo(network, counts, controller.params, tables=topo.tables, index=topo.index)
    if controller.crossing_time is not None:
        qubo = add_dwell_penalty(qubo, _dwell_state(world.t, signals, topo, controller.crossing_time))

    start = time.perf_counter()
    optimum = None
    if controller.solver == "exact":
        result = solve_exact(qubo, topo.index, counts=counts)
        selected, energy = result.assignment.selected, result.best_energy
        optimum = energy
    elif controller.solver == "sa":
        cfg = SaConfig(
            num_reads=controller.sa.num_reads,
            num_sweeps=controller.sa.num_sweeps,
            beta_min=controller.sa.beta_min,
            beta_max=controller.sa.beta_max,
            seed=world.scenario.seed ^ step_index,
        )
        result = solve_sa(qubo, cfg, counts=counts)
        selected, energy = result.assignment.selected, result.best_energy
    else:
        selected = solve_local(counts, network, signals.current_mode).selected
        energy = evaluate(qubo, topo.index.encode(selected))
    metrics.solver_ms.append(1000.0 * (time.perf_counter() - start))
    if controller.solver != "local" and controller.hold_ties:
        selected, energy = _hold_ties(qubo, topo.index, selected, energy, signals.current_mode)

    if optimum is None and controller.reference:
        optimum = solve_exact(qubo, topo.index).best_energy
    metrics.per_step_energy.append(energy)
    if optimum is not None:
        metrics.per_step_optimum.append(optimum)
        metrics.per_step_rel_error.append(_relative_error(energy, optimum))
    zero, nonzero = census_first_order(qubo)
    metrics.first_order_zero.append(zero)
    metrics.first_order_nonzero.append(nonzero)
    metrics.optimizer_calls += 1
    return selected


def run_simulation(
    scenario: Scenario,
    controller: Controller,
    event_log: list | None = None,
    topology: Topology | None = None,
) -> SimMetrics:
    """Run the closed loop for ``scenario.duration`` seconds.

    Optimizing controllers act at every multiple of ``t_interval`` (t = 0
    included). If ``event_log`` is a list, ``(tick, vehicle, event)`` records
    with events inject/stop/go/arrive are appended to it.
    """
    world = World(scenario, topology)
    network = world.topo.network
    signals = SignalState.initial(network)
    metrics = SimMetrics()
    if isinstance(controller, Static):
        signals.apply(dict(controller.assignment), 0)

    if event_log is not None:
        for v in range(world.loaded):
            event_log.append((0, v, "inject"))
        was_red = np.zeros_like(world.red)
        was_arrived = world.state == _kernel.ARRIVED

    step_index = 0
    for t in range(scenario.duration):
        new = world.load_injections()
        if isinstance(controller, FixedCycle):
            metrics.signal_switches += signals.apply(
                {i: fixed_cycle_mode(t, network.intersections[i].num_modes, controller.cycle_s)
                 for i in network.signalized},
                t,
            )
        elif isinstance(controller, Optimized) and t % scenario.t_interval == 0:
            try:
                selected = _optimize(world, signals, controller, step_index, metrics)
            except Exception as exc:
                raise RuntimeError(f"optimizer failed at step {step_index} (t={t})") from exc
            metrics.signal_switches += signals.apply(selected, t)
            step_index += 1
        world.set_signals(signals)
        _, at_red = world.advance()
        metrics.queued_per_tick.append(at_red)

        if event_log is not None:
            event_log.extend((t, v, "inject") for v in new)
            red = world.red.astype(bool)
            for v in np.flatnonzero(red & ~was_red):
                event_log.append((t, int(v), "stop"))
            for v in np.flatnonzero(~red & was_red):
                event_log.append((t, int(v), "go"))
            arrived = world.state == _kernel.ARRIVED
            for v in np.flatnonzero(arrived & ~was_arrived):
                event_log.append((t, int(v), "arrive"))
            was_red, was_arrived = red, arrived

    metrics.vehicle_waiting = world.waiting.copy()
    metrics.total_waiting_s = float(world.waiting.sum())
    metrics.vehicles_arrived = world.arrived
    metrics.vehicles_loaded = world.loaded
    metrics.on_map = world.on_map
    return metrics


def recount_waiting(event_log: list, duration: int) -> int:
    """Total waiting seconds reconstructed from stop/go records alone."""
    open_since: dict[int, int] = {}
    total = 0
    for t, v, event in event_log:
        if event == "stop":
            open_since[v] = t
        elif event == "go":
            total += t - open_since.pop(v)
    total += sum(duration - t for t in open_since.values())
    return total


# --------------------------------------------------------------------------
# scenario files


def controller_from_dict(doc: dict) -> Controller:
    kind = doc.get("type", "exact")
    if kind == "fixed":
        return FixedCycle(float(doc.get("cycle_s", 90.0)))
    if kind == "static":
        return Static({str(k): int(v) for k, v in doc["assignment"].items()})
    if kind in ("exact", "sa", "local", "optimized"):
        solver = doc.get("solver", kind if kind != "optimized" else "exact")
        sa = SaConfig(
            num_reads=int(doc.get("num_reads", 1000)),
            num_sweeps=int(doc.get("num_sweeps", 1000)),
        )
        return Optimized(
            solver=solver,
            params=Hyperparameters(float(doc.get("beta", 0.0)), float(doc.get("gamma", 10.0))),
            sa=sa,
            reference=bool(doc.get("reference", False)),
            crossing_time=doc.get("crossing_time"),
            hold_ties=bool(doc.get("hold_ties", True)),
        )
    raise ValueError(f"unknown controller type {kind!r}")


def resolve_network(ref: str, base: Path | None = None) -> RoadNetwork:
    """A path to a network file, or the name of a built-in network."""
    from .synthetic import BUILTIN_NETWORKS, builtin

    path = Path(ref)
    if base is not None and not path.is_absolute():
        path = base / path
    if path.exists():
        return load_network(path)
    if ref in BUILTIN_NETWORKS:
        return builtin(ref)
    raise FileNotFoundError(f"network {ref!r} is neither a file nor a built-in name")


SCENARIO_KEYS = {"network_path", "initial_vehicle_count", "injection_rate", "duration_s",
                 "t_interval_s", "seed", "controller"}


def load_scenario(path: str | Path) -> tuple[Scenario, Controller | None]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    unknown = set(doc) - SCENARIO_KEYS
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    network = resolve_network(doc["network_path"], path.parent)
    scenario = Scenario(
        network=network,
        initial_vehicle_count=int(doc.get("initial_vehicle_count", 200)),
        injection_rate=float(doc.get("injection_rate", 2.0)),
        duration=int(doc.get("duration_s", 400)),
        t_interval=int(doc.get("t_interval_s", 5)),
        seed=int(doc.get("seed", 0)),
        network_path=doc["network_path"],
    )
    controller = controller_from_dict(doc["controller"]) if "controller" in doc else None
    return scenario, controller
