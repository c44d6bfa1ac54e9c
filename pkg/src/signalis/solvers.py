"""Solvers for mode-selection QUBOs.

* :func:`solve_sa` - seeded simulated annealing with a geometric inverse
  temperature schedule derived from the model's energy scales.
* :func:`solve_exact` - exact optimum over one-hot vectors, by enumeration
  for small instances or min-sum variable elimination on the intersection
  graph for larger ones.
* :func:`solve_binary` - brute force over all ``2^M`` binary vectors, used to
  confirm that the one-hot penalty is large enough.
* :func:`solve_local` - per-intersection greedy choice ignoring coordination.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .network import RoadNetwork
from .qubo import (
    ModeAssignment,
    Qubo,
    TrafficCounts,
    VariableIndex,
    decode,
    evaluate,
    one_hot_terms,
)

__all__ = [
    "SaConfig",
    "SolveResult",
    "DeltaBounds",
    "SolverBudgetError",
    "qubo_to_ising",
    "ising_energy",
    "compute_delta_bounds",
    "geometric_betas",
    "solve_sa",
    "solve_exact",
    "solve_binary",
    "solve_local",
    "write_samples",
]

ENUMERATION_BUDGET = 10**8
BINARY_LIMIT = 24
FACTOR_BUDGET = 10**7


class SolverBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class SaConfig:
    num_reads: int = 1000
    num_sweeps: int = 1000
    beta_min: float | None = None
    beta_max: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.num_reads < 1 or self.num_sweeps < 1:
            raise ValueError("num_reads and num_sweeps must be positive")
        if self.beta_min is not None and self.beta_max is not None and not self.beta_min < self.beta_max:
            raise ValueError("beta_min must be below beta_max")


@dataclass
class SolveResult:
    best_x: np.ndarray
    best_energy: float
    samples: list[tuple[np.ndarray, float, int]] = field(default_factory=list)
    elapsed: float = 0.0
    assignment: ModeAssignment | None = None
    reads: np.ndarray | None = None
    read_energies: np.ndarray | None = None


@dataclass(frozen=True)
class DeltaBounds:
    delta_min: float
    delta_max: float

    @property
    def beta_min(self) -> float:
        return math.log(2) / self.delta_max

    @property
    def beta_max(self) -> float:
        return math.log(100) / self.delta_min


def qubo_to_ising(qubo: Qubo) -> tuple[np.ndarray, dict[tuple[int, int], float], float]:
    """Substitute ``x = (1 + s) / 2``; returns ``(h, J, offset)``."""
    h = qubo.linear / 2.0
    J: dict[tuple[int, int], float] = {}
    offset = qubo.offset + qubo.linear.sum() / 2.0
    for (k, l), q in qubo.quadratic.items():
        J[(k, l)] = q / 4.0
        h[k] += q / 4.0
        h[l] += q / 4.0
        offset += q / 4.0
    return h, J, offset


def ising_energy(h, J, offset, s) -> float:
    s = np.asarray(s, dtype=float)
    return offset + float(h @ s) + sum(v * s[k] * s[l] for (k, l), v in J.items())


def compute_delta_bounds(h, J) -> DeltaBounds:
    """Energy scales of single spin flips.

    The largest possible flip cost is ``2 (|h_k| + sum_l |J_kl|)``; the finest
    granularity is twice the smallest nonzero coefficient magnitude.
    """
    h = np.asarray(h, dtype=float)
    reach = np.abs(h).copy()
    for (k, l), v in J.items():
        reach[k] += abs(v)
        reach[l] += abs(v)
    mags = [abs(v) for v in h if v != 0] + [abs(v) for v in J.values() if v != 0]
    if not mags:
        raise ValueError("all-zero model has no energy scale")
    return DeltaBounds(delta_min=2.0 * min(mags), delta_max=2.0 * float(reach.max()))


def geometric_betas(beta_min: float, beta_max: float, num_sweeps: int) -> np.ndarray:
    if num_sweeps == 1:
        return np.array([beta_max])
    return beta_min * (beta_max / beta_min) ** (np.arange(num_sweeps) / (num_sweeps - 1))


def _read_seeds(seed: int, num_reads: int) -> np.ndarray:
    # each read r gets its own stream from seed XOR r, folded to 32 bits
    return np.array(
        [
            np.random.SeedSequence((seed ^ r) & 0xFFFFFFFFFFFFFFFF).generate_state(1)[0]
            for r in range(num_reads)
        ],
        dtype=np.uint32,
    )


def _symmetric_csr(qubo: Qubo) -> sp.csr_matrix:
    rows, cols, vals = qubo.coo
    n = qubo.num_vars
    mat = sp.coo_matrix(
        (np.concatenate([vals, vals]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(n, n),
    ).tocsr()
    mat.sort_indices()
    return mat


def _collect(qubo: Qubo, states: np.ndarray) -> tuple[list, np.ndarray]:
    """Unique samples with multiplicities, ordered by (energy, first read).

    Also returns the energy of every individual read.
    """
    uniq, first, inverse, counts = np.unique(
        states, axis=0, return_index=True, return_inverse=True, return_counts=True
    )
    energies = np.array([evaluate(qubo, row) for row in uniq])
    samples = [(int(r), row.astype(np.int8), float(e), int(c)) for row, r, e, c in zip(uniq, first, energies, counts)]
    samples.sort(key=lambda t: (t[2], t[0]))
    return [(x, e, c) for _, x, e, c in samples], energies[np.ravel(inverse)]


def solve_sa(qubo: Qubo, config: SaConfig = SaConfig(), counts: TrafficCounts | None = None) -> SolveResult:
    from ._anneal import anneal

    if qubo.num_vars == 0:
        raise ValueError("cannot anneal an empty QUBO")
    start = time.perf_counter()
    beta_min, beta_max = config.beta_min, config.beta_max
    if beta_min is None or beta_max is None:
        h, J, _ = qubo_to_ising(qubo)
        bounds = compute_delta_bounds(h, J)
        beta_min = bounds.beta_min if beta_min is None else beta_min
        beta_max = bounds.beta_max if beta_max is None else beta_max
    betas = geometric_betas(beta_min, beta_max, config.num_sweeps)
    csr = _symmetric_csr(qubo)
    states = anneal(
        qubo.linear,
        csr.indptr.astype(np.int64),
        csr.indices.astype(np.int64),
        csr.data.astype(float),
        betas,
        _read_seeds(config.seed, config.num_reads),
    )
    samples, per_read = _collect(qubo, states)
    best_x, best_energy, _ = samples[0]
    assignment = decode(best_x, qubo.index, counts) if qubo.index is not None else None
    return SolveResult(best_x, best_energy, samples, time.perf_counter() - start, assignment,
                       reads=states, read_energies=per_read)


def write_samples(result: SolveResult, path) -> None:
    """One CSV line per annealing read: read, energy, x_bits."""
    if result.reads is None:
        raise ValueError("result carries no per-read samples")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("read,energy,x_bits\n")
        for r, (x, e) in enumerate(zip(result.reads, result.read_energies)):
            fh.write(f"{r},{float(e)!r},{''.join(map(str, x.tolist()))}\n")


NEAR_TIE = 1e-9


def _near_minimum(e: np.ndarray) -> np.ndarray:
    """Positions whose vectorized energy is within rounding noise of the minimum."""
    lo = float(e.min())
    return np.flatnonzero(e <= lo + NEAR_TIE * max(1.0, abs(lo)))


def _enumerate_one_hot(qubo, index, unary, pairwise, names, sizes) -> tuple[int, ...]:
    total = math.prod(sizes)
    if total > ENUMERATION_BUDGET:
        raise SolverBudgetError(
            f"one-hot enumeration needs {total} assignments, budget is {ENUMERATION_BUDGET}"
        )
    pos = {name: p for p, name in enumerate(names)}
    # mixed radix with the first intersection most significant -> lexicographic order
    strides = [math.prod(sizes[p + 1:]) for p in range(len(sizes))]

    def modes(c: int) -> tuple[int, ...]:
        return tuple(int((c // strides[p]) % sizes[p]) for p in range(len(sizes)))

    best_val, best_code = math.inf, 0
    chunk = 1 << 18
    for lo in range(0, total, chunk):
        code = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        digits = [(code // strides[p]) % sizes[p] for p in range(len(sizes))]
        e = np.zeros(code.size)
        for name in names:
            e += unary[name][digits[pos[name]]]
        for (i, j), table in pairwise.items():
            e += table[digits[pos[i]], digits[pos[j]]]
        # settle near-ties with the exactly rounded energy; first code wins
        for a in _near_minimum(e):
            c = int(code[a])
            val = evaluate(qubo, index.encode(dict(zip(names, modes(c)))))
            if val < best_val:
                best_val, best_code = val, c
    return modes(best_code)


def _elimination_order(names, edges) -> list[str]:
    """Greedy min-degree ordering (ties by index position)."""
    nbrs = {name: set() for name in names}
    for i, j in edges:
        nbrs[i].add(j)
        nbrs[j].add(i)
    rank = {name: p for p, name in enumerate(names)}
    order = []
    remaining = set(names)
    while remaining:
        v = min(remaining, key=lambda n: (len(nbrs[n]), rank[n]))
        order.append(v)
        for a in nbrs[v]:
            nbrs[a] |= nbrs[v] - {a}
            nbrs[a].discard(v)
        remaining.discard(v)
        del nbrs[v]
    return order


def _eliminate(unary, pairwise, names, sizes) -> tuple[int, ...]:
    """Exact min-sum bucket elimination over the intersection interaction graph."""
    size = dict(zip(names, sizes))
    rank = {name: p for p, name in enumerate(names)}
    factors: list[tuple[tuple[str, ...], np.ndarray]] = [((n,), unary[n]) for n in names]
    factors += [((i, j), t) for (i, j), t in pairwise.items()]
    order = _elimination_order(names, pairwise.keys())

    trace = []
    for v in order:
        bucket = [f for f in factors if v in f[0]]
        factors = [f for f in factors if v not in f[0]]
        scope = sorted({u for s, _ in bucket for u in s} - {v}, key=rank.get)
        full = tuple(scope) + (v,)
        cells = math.prod(size[u] for u in full)
        if cells > FACTOR_BUDGET:
            raise SolverBudgetError(
                f"elimination factor over {len(full)} intersections has {cells} cells, "
                f"budget is {FACTOR_BUDGET}"
            )
        joint = np.zeros([size[u] for u in full])
        for s, t in bucket:
            perm = sorted(range(len(s)), key=lambda a: full.index(s[a]))
            aligned = np.transpose(t, perm)
            shape = [size[u] if u in s else 1 for u in full]
            joint = joint + aligned.reshape(shape)
        trace.append((v, tuple(scope), np.argmin(joint, axis=-1)))
        factors.append((tuple(scope), joint.min(axis=-1)))

    choice: dict[str, int] = {}
    for v, scope, arg in reversed(trace):
        choice[v] = int(arg[tuple(choice[u] for u in scope)])
    return tuple(choice[n] for n in names)


def solve_exact(
    qubo: Qubo,
    index: VariableIndex | None = None,
    method: str = "auto",
    verify_binary: bool = False,
    counts: TrafficCounts | None = None,
) -> SolveResult:
    """Minimum-energy one-hot vector.

    ``method`` is ``"enumerate"`` (lexicographic product enumeration, ties
    go to the first assignment), ``"eliminate"`` (variable elimination, ties
    to the lower mode during back-substitution) or ``"auto"``. With
    ``verify_binary`` the result is checked against all ``2^M`` vectors.
    """
    start = time.perf_counter()
    index = index or qubo.index
    if index is None:
        raise ValueError("solve_exact needs a variable index")
    if qubo.index is None:
        from dataclasses import replace

        qubo = replace(qubo, index=index)
    unary, pairwise = one_hot_terms(qubo)
    names = index.intersections
    sizes = [len(index.group(i)) for i in names]

    if method == "auto":
        method = "enumerate" if math.prod(sizes) <= 4096 else "eliminate"
    if method == "enumerate":
        modes = _enumerate_one_hot(qubo, index, unary, pairwise, names, sizes)
    elif method == "eliminate":
        modes = _eliminate(unary, pairwise, names, sizes)
    else:
        raise ValueError(f"unknown method {method!r}")

    selected = dict(zip(names, modes))
    x = index.encode(selected)
    energy = evaluate(qubo, x)
    if verify_binary:
        check = solve_binary(qubo)
        if check.best_energy < energy:
            raise AssertionError(
                f"non-one-hot vector beats the one-hot optimum ({check.best_energy} < {energy}); "
                "the penalty weight is too small"
            )
    return SolveResult(
        best_x=x,
        best_energy=energy,
        samples=[(x, energy, 1)],
        elapsed=time.perf_counter() - start,
        assignment=ModeAssignment(selected),
    )


def solve_binary(qubo: Qubo) -> SolveResult:
    """Brute-force minimum over every binary vector (first in counting order on ties)."""
    n = qubo.num_vars
    if n > BINARY_LIMIT:
        raise SolverBudgetError(f"full enumeration needs 2^{n} vectors, limit is 2^{BINARY_LIMIT}")
    start = time.perf_counter()
    bits = np.arange(n, dtype=np.int64)
    best_val, best_code = math.inf, 0
    chunk = 1 << 16
    for lo in range(0, 1 << n, chunk):
        code = np.arange(lo, min(1 << n, lo + chunk), dtype=np.int64)
        X = ((code[:, None] >> bits) & 1).astype(np.int8)
        e = qubo.energies(X)
        for a in _near_minimum(e):
            val = evaluate(qubo, X[a])
            if val < best_val:
                best_val, best_code = val, int(code[a])
    x = ((best_code >> bits) & 1).astype(np.int8)
    energy = evaluate(qubo, x)
    assignment = decode(x, qubo.index) if qubo.index is not None else None
    return SolveResult(x, energy, [(x, energy, 1)], time.perf_counter() - start, assignment)


def solve_local(
    counts: TrafficCounts,
    network: RoadNetwork,
    current: dict[str, int] | None = None,
) -> ModeAssignment:
    """Busiest mode per intersection; an idle intersection keeps its current mode."""
    selected = {}
    for i in network.signalized:
        c = [counts[(i, m)] for m in range(network.intersections[i].num_modes)]
        if not any(c):
            selected[i] = (current or {}).get(i, 0)
        else:
            selected[i] = int(np.argmax(c))
    return ModeAssignment(selected)
