"""Multi-instance experiments: beta grid search, controller comparison, aggregation."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .network import RoadNetwork
from .qubo import Hyperparameters
from .sim import (
    Controller,
    FixedCycle,
    Optimized,
    Scenario,
    SimMetrics,
    resolve_network,
    run_simulation,
)
from .solvers import SaConfig

__all__ = [
    "ExperimentPlan",
    "Instance",
    "BetaSearch",
    "AggregateResult",
    "generate_instances",
    "grid_search_beta",
    "relative_error",
    "standard_error",
    "run_experiment",
    "aggregate",
    "load_plan",
    "read_results",
    "write_results",
    "instance_seed",
    "RESULT_COLUMNS",
]

log = logging.getLogger(__name__)

DEFAULT_BETA_GRID = tuple(round(0.01 * k, 2) for k in range(11))
CONTROLLERS = ("fixed", "local", "exact", "sa")
RESULT_COLUMNS = [
    "flow",
    "instance",
    "controller",
    "beta",
    "total_waiting_s",
    "total_waiting_h",
    "mean_energy",
    "mean_rel_energy_err",
    "mean_solver_ms",
    "zero_terms_mean",
    "nonzero_terms_mean",
    "seed",
]
WALL_CLOCK_COLUMNS = ("mean_solver_ms",)


@dataclass(frozen=True)
class ExperimentPlan:
    network: str = "benchmark"
    flows: tuple[int, ...] = (200, 300, 400, 500, 600)
    instances_per_flow: int = 10
    controllers: tuple[str, ...] = CONTROLLERS
    beta_grid: tuple[float, ...] = DEFAULT_BETA_GRID
    gamma: float = 10.0
    base_seed: int = 0
    duration: int = 400
    t_interval: int = 5
    injection_rate: float = 2.0
    sa_num_reads: int = 1000
    sa_num_sweeps: int = 1000
    betas: dict[int, float] | None = None  # skip the grid search for these flows

    def __post_init__(self):
        grid = list(self.beta_grid)
        if not grid:
            raise ValueError("beta grid is empty")
        if any(b >= a for b, a in zip(grid, grid[1:])) or grid[0] < 0 or grid[-1] > 0.1 + 1e-12:
            raise ValueError("beta grid must be strictly increasing within [0, 0.1]")
        unknown = set(self.controllers) - set(CONTROLLERS)
        if unknown:
            raise ValueError(f"unknown controllers {sorted(unknown)}")
        if self.instances_per_flow < 1:
            raise ValueError("need at least one instance per flow")


def load_plan(path: str | Path) -> tuple[ExperimentPlan, Path]:
    """Read a JSON plan; returns it with the directory relative paths resolve against."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    keys = {
        "network": "network",
        "network_path": "network",
        "flows": "flows",
        "instances_per_flow": "instances_per_flow",
        "controllers": "controllers",
        "beta_grid": "beta_grid",
        "gamma": "gamma",
        "base_seed": "base_seed",
        "duration_s": "duration",
        "t_interval_s": "t_interval",
        "injection_rate": "injection_rate",
        "sa_num_reads": "sa_num_reads",
        "sa_num_sweeps": "sa_num_sweeps",
        "betas": "betas",
    }
    unknown = set(doc) - set(keys)
    if unknown:
        raise ValueError(f"unknown plan keys: {sorted(unknown)}")
    kwargs = {keys[k]: v for k, v in doc.items()}
    for name in ("flows", "controllers", "beta_grid"):
        if name in kwargs:
            kwargs[name] = tuple(kwargs[name])
    if "betas" in kwargs:
        kwargs["betas"] = {int(k): float(v) for k, v in kwargs["betas"].items()}
    return ExperimentPlan(**kwargs), path.parent


@dataclass(frozen=True)
class Instance:
    flow: int
    index: int
    scenario: Scenario


def instance_seed(base_seed: int, flow: int, index: int) -> int:
    return base_seed + zlib.crc32(f"{flow}/{index}".encode())


def generate_instances(plan: ExperimentPlan, network: RoadNetwork | None = None,
                       base: Path | None = None) -> list[Instance]:
    network = network or resolve_network(plan.network, base)
    return [
        Instance(
            flow,
            k,
            Scenario(
                network=network,
                initial_vehicle_count=flow,
                injection_rate=plan.injection_rate,
                duration=plan.duration,
                t_interval=plan.t_interval,
                seed=instance_seed(plan.base_seed, flow, k),
                network_path=plan.network,
            ),
        )
        for flow in plan.flows
        for k in range(plan.instances_per_flow)
    ]


def relative_error(optimal: float, fixed: float) -> float:
    """Percent by which the fixed-cycle total exceeds the optimized one."""
    if not optimal > 0:
        raise ValueError(f"optimal waiting time must be positive, got {optimal}")
    return 100.0 * (fixed - optimal) / optimal


def standard_error(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return math.nan
    return float(values.std(ddof=1) / math.sqrt(values.size))


# --------------------------------------------------------------------------
# job execution


def _controller(kind: str, beta: float, plan: ExperimentPlan) -> Controller:
    if kind == "fixed":
        return FixedCycle()
    return Optimized(
        solver=kind,
        params=Hyperparameters(beta, plan.gamma),
        sa=SaConfig(num_reads=plan.sa_num_reads, num_sweeps=plan.sa_num_sweeps),
        reference=kind != "exact",
    )


def _run_job(job):
    key, scenario, controller = job
    try:
        return key, run_simulation(scenario, controller), None
    except Exception as exc:  # recorded, excluded from aggregation
        return key, None, f"{type(exc).__name__}: {exc}"


def _workers(requested: int | None) -> int:
    env = os.environ.get("SIGNALIS_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, requested or 1)


def _execute(jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


@dataclass
class BetaSearch:
    flow: int
    beta: float
    mean_waiting: dict[float, float]
    runs: dict[float, list] = field(default_factory=dict)


def grid_search_beta(plan: ExperimentPlan, flow: int, instances: list[Instance] | None = None,
                     workers: int | None = None, base: Path | None = None) -> BetaSearch:
    """Pick the beta with the lowest mean total waiting time under the exact solver.

    Ties go to the smallest beta. Failed runs are dropped with a warning.
    """
    if instances is None:
        instances = generate_instances(plan, base=base)
    mine = [inst for inst in instances if inst.flow == flow]
    if not mine:
        raise ValueError(f"flow {flow} is not part of the plan")
    jobs = [
        ((beta, inst.index), inst.scenario, _controller("exact", beta, plan))
        for beta in plan.beta_grid
        for inst in mine
    ]
    runs: dict[float, list] = {float(b): [] for b in plan.beta_grid}
    for (beta, k), metrics, error in _execute(jobs, _workers(workers)):
        if error is not None:
            log.warning("grid search run flow=%s beta=%s instance=%s failed: %s", flow, beta, k, error)
            continue
        runs[float(beta)].append((k, metrics))
    means = {
        b: float(np.mean([m.total_waiting_s for _, m in rs])) if rs else math.inf
        for b, rs in runs.items()
    }
    best = min(means.values())
    chosen = min(b for b, v in means.items() if v == best)
    return BetaSearch(flow, chosen, means, runs)


# --------------------------------------------------------------------------
# results


def _mean(values) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return float(np.mean(vals)) if vals else math.nan


def _row(inst: Instance, kind: str, beta: float | None, m: SimMetrics) -> dict:
    optimized = kind != "fixed"
    return {
        "flow": inst.flow,
        "instance": inst.index,
        "controller": kind,
        "beta": beta if optimized else math.nan,
        "total_waiting_s": m.total_waiting_s,
        "total_waiting_h": m.total_waiting_s / 3600.0,
        "mean_energy": _mean(m.per_step_energy) if optimized else math.nan,
        "mean_rel_energy_err": _mean(m.per_step_rel_error) if optimized else math.nan,
        "mean_solver_ms": _mean(m.solver_ms) if optimized else math.nan,
        "zero_terms_mean": _mean(m.first_order_zero) if optimized else math.nan,
        "nonzero_terms_mean": _mean(m.first_order_nonzero) if optimized else math.nan,
        "seed": inst.scenario.seed,
    }


def _fmt(value) -> str:
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def write_results(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])


def read_results(path: str | Path) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for k, v in raw.items():
                if k in ("flow", "instance", "seed"):
                    row[k] = int(v)
                elif k == "controller":
                    row[k] = v
                else:
                    row[k] = float(v) if v != "" else math.nan
            rows.append(row)
    return rows


@dataclass
class AggregateResult:
    waiting: dict[tuple[int, str], tuple[float, float]]  # (flow, controller) -> (mean s, SE)
    rel_energy_error: dict[tuple[int, str], tuple[float, float]]
    nonzero_terms: dict[tuple[int, str], tuple[float, float]]
    zero_terms: dict[tuple[int, str], tuple[float, float]]
    solver_ms: dict[tuple[int, str], tuple[float, float]]
    betas: dict[int, float]
    rows: list[dict] = field(default_factory=list)
    failures: list[tuple] = field(default_factory=list)
    grid: dict[int, dict[float, float]] = field(default_factory=dict)

    def mean_waiting(self, flow: int, controller: str) -> float:
        return self.waiting[(flow, controller)][0]

    def summary_rows(self) -> list[dict]:
        out = []
        for (flow, kind) in sorted(self.waiting):
            w, w_se = self.waiting[(flow, kind)]
            e, e_se = self.rel_energy_error.get((flow, kind), (math.nan, math.nan))
            z, _ = self.zero_terms.get((flow, kind), (math.nan, math.nan))
            nz, _ = self.nonzero_terms.get((flow, kind), (math.nan, math.nan))
            out.append({
                "flow": flow, "controller": kind, "beta": self.betas.get(flow, math.nan),
                "mean_waiting_h": w / 3600.0, "se_waiting_h": w_se / 3600.0,
                "mean_rel_energy_err": e, "se_rel_energy_err": e_se,
                "zero_terms_mean": z, "nonzero_terms_mean": nz,
            })
        return out


def aggregate(rows: list[dict], betas: dict[int, float] | None = None) -> AggregateResult:
    groups: dict[tuple[int, str], list[dict]] = {}
    for row in rows:
        groups.setdefault((row["flow"], row["controller"]), []).append(row)

    def stat(column):
        out = {}
        for key, rs in sorted(groups.items()):
            vals = [r[column] for r in rs if not math.isnan(r[column])]
            if vals:
                out[key] = (float(np.mean(vals)), standard_error(vals))
        return out

    return AggregateResult(
        waiting=stat("total_waiting_s"),
        rel_energy_error=stat("mean_rel_energy_err"),
        nonzero_terms=stat("nonzero_terms_mean"),
        zero_terms=stat("zero_terms_mean"),
        solver_ms=stat("mean_solver_ms"),
        betas=dict(betas or {}),
        rows=rows,
    )


def run_experiment(plan: ExperimentPlan, out_dir: str | Path | None = None, workers: int | None = None,
                   base: Path | None = None, plots: bool = False) -> AggregateResult:
    """Grid-search beta per flow, then run every (flow, instance, controller).

    Exact-controller rows reuse the grid-search runs at the chosen beta.
    Writes ``results.csv``, ``summary.csv`` and ``betas.json`` to ``out_dir``.
    """
    network = resolve_network(plan.network, base)
    instances = generate_instances(plan, network)
    n_workers = _workers(workers)

    betas: dict[int, float] = {}
    grid: dict[int, dict[float, float]] = {}
    exact_runs: dict[tuple[int, int], SimMetrics] = {}
    failures: list[tuple] = []
    needs_beta = any(c != "fixed" for c in plan.controllers)
    for flow in plan.flows:
        if plan.betas and flow in plan.betas:
            betas[flow] = float(plan.betas[flow])
            continue
        if not needs_beta:
            continue
        search = grid_search_beta(plan, flow, instances, n_workers)
        betas[flow] = search.beta
        grid[flow] = search.mean_waiting
        for k, metrics in search.runs[search.beta]:
            exact_runs[(flow, k)] = metrics
        expected = {inst.index for inst in instances if inst.flow == flow}
        for k in sorted(expected - {k for k, _ in search.runs[search.beta]}):
            failures.append((flow, k, "exact", "failed during grid search"))

    jobs = []
    for inst in instances:
        for kind in plan.controllers:
            if kind == "exact" and (inst.flow, inst.index) in exact_runs:
                continue
            if kind == "exact" and inst.flow in grid:
                continue  # failed during grid search, already recorded
            beta = betas.get(inst.flow, 0.0)
            jobs.append(((inst.flow, inst.index, kind), inst.scenario, _controller(kind, beta, plan)))
    done = {key: (metrics, error) for key, metrics, error in _execute(jobs, n_workers)}

    by_key = {(inst.flow, inst.index): inst for inst in instances}
    rows = []
    for inst in instances:
        for kind in plan.controllers:
            if kind == "exact" and (inst.flow, inst.index) in exact_runs:
                metrics, error = exact_runs[(inst.flow, inst.index)], None
            elif (inst.flow, inst.index, kind) in done:
                metrics, error = done[(inst.flow, inst.index, kind)]
            else:
                continue
            if error is not None:
                log.warning("run flow=%s instance=%s controller=%s failed: %s", inst.flow, inst.index, kind, error)
                failures.append((inst.flow, inst.index, kind, error))
                continue
            rows.append(_row(by_key[(inst.flow, inst.index)], kind, betas.get(inst.flow), metrics))

    result = aggregate(rows, betas)
    result.failures = failures
    result.grid = grid
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results(rows, out / "results.csv")
        summary = result.summary_rows()
        with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            cols = list(summary[0]) if summary else []
            writer.writerow(cols)
            for row in summary:
                writer.writerow([_fmt(row[c]) for c in cols])
        with open(out / "betas.json", "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "chosen": {str(f): b for f, b in betas.items()},
                    "grid_mean_waiting_s": {str(f): {repr(b): v for b, v in g.items()} for f, g in grid.items()},
                    "failures": [list(f) for f in failures],
                },
                fh,
                indent=1,
            )
        if plots:
            from .plotting import plot_results

            plot_results(out / "results.csv", out)
    return result
