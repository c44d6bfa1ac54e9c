"""QUBO assembly for mode selection.

The cost is the sum of three parts over binary mode variables ``x[i, m]``:

* throughput reward ``-sum C_im x_im`` with counts max-scaled into [0, 1];
* coordination reward ``-beta * sum_i sum_{j in N_i} B_ij R_im,jn x_im x_jn``
  (the double sum visits every adjacent pair twice);
* one-hot penalty ``gamma * sum_i (sum_m x_im - 1)^2``.

An optional pedestrian dwell term adds ``(tau_im - T_i)^2`` to the linear
coefficient of every mode that has been held for less than ``T_i`` seconds.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .network import CoefficientTables, RoadNetwork, compute_tables

__all__ = [
    "VariableIndex",
    "TrafficCounts",
    "Hyperparameters",
    "Qubo",
    "ModeAssignment",
    "DwellState",
    "build_qubo",
    "evaluate",
    "decode",
    "add_dwell_penalty",
    "load_counts",
    "dump_counts",
    "export_triplets",
    "import_triplets",
]

Key = tuple[str, int]


@dataclass(frozen=True)
class VariableIndex:
    """Bijection (intersection id, mode index) <-> flat variable id."""

    keys: tuple[Key, ...]

    def __post_init__(self):
        object.__setattr__(self, "_pos", {key: k for k, key in enumerate(self.keys)})
        groups: dict[str, list[int]] = {}
        for k, (i, _) in enumerate(self.keys):
            groups.setdefault(i, []).append(k)
        object.__setattr__(self, "_groups", {i: tuple(v) for i, v in groups.items()})

    @classmethod
    def from_network(cls, network: RoadNetwork) -> "VariableIndex":
        keys = [
            (i, m)
            for i in network.signalized
            for m in range(network.intersections[i].num_modes)
        ]
        return cls(tuple(keys))

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key) -> bool:
        return key in self._pos

    def var(self, intersection: str, mode: int) -> int:
        return self._pos[(intersection, mode)]

    def key(self, k: int) -> Key:
        return self.keys[k]

    @property
    def intersections(self) -> tuple[str, ...]:
        return tuple(self._groups)

    def group(self, intersection: str) -> tuple[int, ...]:
        """Variable ids of one intersection, in mode order."""
        return self._groups[intersection]

    def encode(self, selected: Mapping[str, int]) -> np.ndarray:
        x = np.zeros(len(self.keys), dtype=np.int8)
        for i, m in selected.items():
            x[self.var(i, m)] = 1
        return x


@dataclass(frozen=True)
class TrafficCounts:
    """Vehicles releasable at intersection i under mode m; missing keys are 0."""

    C: dict[Key, float] = field(default_factory=dict)

    def __getitem__(self, key: Key) -> float:
        return self.C.get(key, 0.0)

    def check(self, index: VariableIndex) -> None:
        for key, value in self.C.items():
            if key not in index:
                raise ValueError(f"counts reference unknown (intersection, mode) {key!r}")
            if value < 0:
                raise ValueError(f"negative count {value} for {key!r}")

    def vector(self, index: VariableIndex) -> np.ndarray:
        return np.array([self.C.get(key, 0.0) for key in index.keys], dtype=float)


@dataclass(frozen=True)
class Hyperparameters:
    beta: float = 0.0
    gamma: float = 10.0

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True, eq=False)
class Qubo:
    """``offset + sum linear[k] x_k + sum_{k<l} quadratic[k, l] x_k x_l``.

    ``first_order`` keeps the count-derived share of ``linear`` (zero where a
    mode has no releasable vehicles) so the throughput term can be inspected
    separately from the penalty shift.
    """

    num_vars: int
    linear: np.ndarray
    quadratic: dict[tuple[int, int], float]
    offset: float = 0.0
    index: VariableIndex | None = None
    first_order: np.ndarray | None = None

    def __post_init__(self):
        linear = np.asarray(self.linear, dtype=float)
        if linear.shape != (self.num_vars,):
            raise ValueError(f"linear has shape {linear.shape}, expected ({self.num_vars},)")
        object.__setattr__(self, "linear", linear)
        for (k, l), v in self.quadratic.items():
            if not 0 <= k < l < self.num_vars:
                raise ValueError(f"quadratic key {(k, l)} is not strictly upper-triangular in range")
            if v == 0:
                raise ValueError(f"zero-valued quadratic entry stored at {(k, l)}")
        items = sorted(self.quadratic.items())
        rows = np.array([k for (k, _), _ in items], dtype=np.int64)
        cols = np.array([l for (_, l), _ in items], dtype=np.int64)
        vals = np.array([v for _, v in items], dtype=float)
        object.__setattr__(self, "_coo", (rows, cols, vals))

    @property
    def coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._coo

    def to_dense(self) -> np.ndarray:
        """Upper-triangular matrix with the linear terms on the diagonal."""
        Q = np.diag(self.linear).astype(float)
        rows, cols, vals = self._coo
        Q[rows, cols] = vals
        return Q

    def energies(self, X: np.ndarray) -> np.ndarray:
        """Vectorized energies for a batch of binary rows."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        rows, cols, vals = self._coo
        return self.offset + X @ self.linear + (X[:, rows] * X[:, cols]) @ vals


def evaluate(qubo: Qubo, x) -> float:
    """Energy of one binary vector.

    The sum is exactly rounded, so vectors whose terms form the same multiset
    get bit-identical energies regardless of summation order.
    """
    x = np.asarray(x)
    if x.shape != (qubo.num_vars,):
        raise ValueError(f"x has length {x.size}, expected {qubo.num_vars}")
    on = np.flatnonzero(x)
    terms = [qubo.offset]
    terms.extend(qubo.linear[on].tolist())
    if on.size > 1:
        on_set = set(on.tolist())
        terms.extend(v for (k, l), v in qubo.quadratic.items() if k in on_set and l in on_set)
    return math.fsum(terms)


def build_qubo(
    network: RoadNetwork,
    counts: TrafficCounts,
    params: Hyperparameters,
    tables: CoefficientTables | None = None,
    index: VariableIndex | None = None,
) -> Qubo:
    if tables is None:
        tables = compute_tables(network)
    if index is None:
        index = VariableIndex.from_network(network)
    counts.check(index)
    gamma, beta = params.gamma, params.beta

    c = counts.vector(index)
    top = c.max() if c.size else 0.0
    c_hat = c / top if top > 0 else np.zeros_like(c)
    first_order = -c_hat
    linear = first_order - gamma

    quadratic: dict[tuple[int, int], float] = {}
    for i in index.intersections:
        group = index.group(i)
        for a, k in enumerate(group):
            for l in group[a + 1:]:
                quadratic[(k, l)] = 2.0 * gamma

    if beta > 0:
        for ((i, m), (j, n)), r in sorted(tables.R.items()):
            # each unordered pair appears twice in R; keep the (i < j) visit and double it
            if not r or i >= j:
                continue
            k, l = index.var(i, m), index.var(j, n)
            key = (k, l) if k < l else (l, k)
            quadratic[key] = quadratic.get(key, 0.0) - 2.0 * beta * tables.connectivity(i, j) * r
        quadratic = {key: v for key, v in quadratic.items() if v != 0}

    return Qubo(
        num_vars=len(index),
        linear=linear,
        quadratic=quadratic,
        offset=gamma * len(index.intersections),
        index=index,
        first_order=first_order,
    )


@dataclass(frozen=True)
class ModeAssignment:
    selected: dict[str, int]
    feasible: bool = True
    repaired: frozenset[str] = frozenset()


def decode(x, index: VariableIndex, counts: TrafficCounts | None = None) -> ModeAssignment:
    """Map a binary vector to one mode per intersection, repairing one-hot violations.

    A violated intersection takes the selected mode with most releasable
    vehicles, or the overall busiest mode when nothing is selected (ties go
    to the lower mode index).
    """
    x = np.asarray(x)
    if x.shape != (len(index),):
        raise ValueError(f"x has length {x.size}, expected {len(index)}")
    counts = counts or TrafficCounts()
    selected: dict[str, int] = {}
    repaired = set()
    for i in index.intersections:
        group = index.group(i)
        on = [m for m, k in enumerate(group) if x[k]]
        if len(on) == 1:
            selected[i] = on[0]
            continue
        candidates = on or list(range(len(group)))
        selected[i] = max(candidates, key=lambda m: (counts[(i, m)], -m))
        repaired.add(i)
    return ModeAssignment(selected, feasible=not repaired, repaired=frozenset(repaired))


@dataclass(frozen=True)
class DwellState:
    """Seconds each mode has been held (``tau``) and pedestrian crossing times (``T``)."""

    tau: dict[Key, float]
    T: dict[str, float]


def add_dwell_penalty(qubo: Qubo, dwell: DwellState) -> Qubo:
    """Add ``(tau - T)^2`` to modes held for less than the crossing time.

    Modes absent from ``dwell.tau`` count as not held (``tau = 0``).
    """
    if qubo.index is None:
        raise ValueError("qubo has no variable index")
    for key, tau in dwell.tau.items():
        if tau < 0:
            raise ValueError(f"negative dwell time {tau} for {key!r}")
    for i, t in dwell.T.items():
        if not t > 0:
            raise ValueError(f"crossing time for {i!r} must be positive, got {t}")
    missing = [i for i in qubo.index.intersections if i not in dwell.T]
    if missing:
        raise ValueError(f"no crossing time for intersections {missing}")

    extra = np.zeros(qubo.num_vars)
    for k, (i, m) in enumerate(qubo.index.keys):
        tau = dwell.tau.get((i, m), 0.0)
        if tau < dwell.T[i]:
            extra[k] = (tau - dwell.T[i]) ** 2
    if not extra.any():
        return qubo
    return replace(qubo, linear=qubo.linear + extra)


def load_counts(path: str | Path) -> TrafficCounts:
    with open(path, encoding="utf-8") as fh:
        rows = json.load(fh)
    if not isinstance(rows, list):
        raise ValueError("counts file must hold a JSON array")
    C: dict[Key, float] = {}
    for row in rows:
        extra = set(row) - {"intersection", "mode", "count"}
        if extra:
            raise ValueError(f"unknown counts keys: {sorted(extra)}")
        key = (str(row["intersection"]), int(row["mode"]))
        C[key] = C.get(key, 0.0) + float(row["count"])
    return TrafficCounts(C)


def dump_counts(counts: TrafficCounts, path: str | Path) -> None:
    rows = [
        {"intersection": i, "mode": m, "count": c}
        for (i, m), c in sorted(counts.C.items())
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=1)


def export_triplets(qubo: Qubo, path: str | Path) -> None:
    """Write ``M offset`` then one ``k l value`` line per nonzero (diagonal = linear)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{qubo.num_vars} {qubo.offset!r}\n")
        for k, v in enumerate(qubo.linear):
            if v != 0:
                fh.write(f"{k} {k} {float(v)!r}\n")
        for (k, l), v in sorted(qubo.quadratic.items()):
            fh.write(f"{k} {l} {float(v)!r}\n")


def import_triplets(path: str | Path) -> Qubo:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        num_vars, offset = int(header[0]), float(header[1])
        linear = np.zeros(num_vars)
        quadratic: dict[tuple[int, int], float] = {}
        for line in fh:
            if not line.strip():
                continue
            k, l, v = line.split()
            k, l, v = int(k), int(l), float(v)
            if k == l:
                linear[k] += v
            else:
                key = (min(k, l), max(k, l))
                quadratic[key] = quadratic.get(key, 0.0) + v
    return Qubo(num_vars, linear, {k: v for k, v in quadratic.items() if v}, offset)


def one_hot_terms(qubo: Qubo) -> tuple[dict[str, np.ndarray], dict[tuple[str, str], np.ndarray]]:
    """Unary and pairwise cost tables of the QUBO restricted to one-hot vectors.

    Within-intersection couplings never fire under one-hot, so they are
    dropped. Returns ``unary[i][m]`` and ``pairwise[(i, j)][m, n]`` with i < j
    in index order; the constant offset is not included.
    """
    index = qubo.index
    if index is None:
        raise ValueError("qubo has no variable index")
    unary = {i: qubo.linear[list(index.group(i))].copy() for i in index.intersections}
    pairwise: dict[tuple[str, str], np.ndarray] = {}
    for (k, l), v in qubo.quadratic.items():
        (i, m), (j, n) = index.key(k), index.key(l)
        if i == j:
            continue
        if (i, j) not in pairwise:
            pairwise[(i, j)] = np.zeros((len(index.group(i)), len(index.group(j))))
        pairwise[(i, j)][m, n] += v
    return unary, pairwise


def iter_one_hot(index: VariableIndex) -> Iterable[dict[str, int]]:
    """Every one-hot assignment in lexicographic order (small instances only)."""
    import itertools

    names = index.intersections
    sizes = [len(index.group(i)) for i in names]
    for combo in itertools.product(*(range(s) for s in sizes)):
        yield dict(zip(names, combo))
