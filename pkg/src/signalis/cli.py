"""``signalis`` command line: validate, solve, simulate, gridsearch, experiment, plot."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace

from .network import validate
from .qubo import Hyperparameters, build_qubo, evaluate, export_triplets, load_counts
from .sim import FixedCycle, Optimized, load_scenario, resolve_network, run_simulation
from .solvers import SaConfig, solve_exact, solve_local, solve_sa, write_samples

__all__ = ["main", "build_parser"]


def _finite(value: float):
    return None if isinstance(value, float) and not math.isfinite(value) else value


def _print(doc) -> None:
    json.dump(doc, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")


def cmd_validate(args) -> int:
    network = resolve_network(args.network)
    problems = validate(network)
    for p in problems:
        print(p)
    if not problems:
        print(f"ok: {len(network.signalized)} signalized intersections, "
              f"{network.num_variables} variables, {len(network.segments)} segments")
    return 1 if problems else 0


def cmd_solve(args) -> int:
    network = resolve_network(args.network)
    counts = load_counts(args.counts)
    qubo = build_qubo(network, counts, Hyperparameters(args.beta, args.gamma))
    if args.export_qubo:
        export_triplets(qubo, args.export_qubo)
    doc = {"solver": args.solver, "num_vars": qubo.num_vars}
    if args.solver == "sa":
        result = solve_sa(qubo, SaConfig(num_reads=args.reads, num_sweeps=args.sweeps, seed=args.seed), counts)
        if args.samples:
            write_samples(result, args.samples)
        assignment, energy = result.assignment, result.best_energy
        x = result.best_x
    elif args.solver == "exact":
        result = solve_exact(qubo, counts=counts)
        assignment, energy, x = result.assignment, result.best_energy, result.best_x
    else:
        assignment = solve_local(counts, network)
        x = qubo.index.encode(assignment.selected)
        energy = evaluate(qubo, x)
    doc.update(
        energy=energy,
        modes=assignment.selected,
        feasible=assignment.feasible,
        repaired=list(assignment.repaired),
        x="".join(map(str, x.tolist())),
    )
    _print(doc)
    return 0


def _cli_controller(kind: str, base, beta: float | None):
    if kind == "fixed":
        return FixedCycle() if not isinstance(base, FixedCycle) else base
    if isinstance(base, Optimized):
        ctrl = replace(base, solver=kind)
    else:
        ctrl = Optimized(solver=kind)
    if beta is not None:
        ctrl = replace(ctrl, params=Hyperparameters(beta, ctrl.params.gamma))
    return ctrl


def cmd_simulate(args) -> int:
    scenario, controller = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    if args.controller:
        controller = _cli_controller(args.controller, controller, args.beta)
    elif controller is None:
        raise SystemExit("the scenario names no controller; pass --controller")
    events = [] if args.events else None
    metrics = run_simulation(scenario, controller, event_log=events)
    if events is not None:
        with open(args.events, "w", encoding="utf-8") as fh:
            for t, v, event in events:
                fh.write(f"{t},{v},{event}\n")
    _print({
        "total_waiting_s": metrics.total_waiting_s,
        "total_waiting_h": metrics.total_waiting_s / 3600.0,
        "vehicles_loaded": metrics.vehicles_loaded,
        "vehicles_arrived": metrics.vehicles_arrived,
        "on_map": metrics.on_map,
        "optimizer_calls": metrics.optimizer_calls,
        "mean_energy": _finite(sum(metrics.per_step_energy) / len(metrics.per_step_energy))
        if metrics.per_step_energy else None,
    })
    return 0


def cmd_gridsearch(args) -> int:
    from .experiment import grid_search_beta, load_plan

    plan, base = load_plan(args.plan)
    search = grid_search_beta(plan, args.flow, workers=args.workers, base=base)
    _print({
        "flow": args.flow,
        "beta": search.beta,
        "mean_waiting_s": {repr(b): _finite(v) for b, v in search.mean_waiting.items()},
    })
    return 0


def cmd_experiment(args) -> int:
    from .experiment import load_plan, run_experiment

    plan, base = load_plan(args.plan)
    result = run_experiment(plan, args.out, workers=args.workers, base=base, plots=args.plots)
    for row in result.summary_rows():
        print(f"flow {row['flow']:>4}  {row['controller']:<5}  "
              f"waiting {row['mean_waiting_h']:8.3f} h  (SE {row['se_waiting_h']:.3f})")
    if result.failures:
        print(f"{len(result.failures)} runs failed; see betas.json", file=sys.stderr)
    return 0


def cmd_plot(args) -> int:
    from .plotting import plot_results

    for path in plot_results(args.results, args.out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signalis", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a network file")
    p.add_argument("network", help="network JSON file or built-in name")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="build and solve one QUBO")
    p.add_argument("--network", required=True)
    p.add_argument("--counts", required=True)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=10.0)
    p.add_argument("--solver", choices=("sa", "exact", "local"), default="exact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reads", type=int, default=1000)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--samples", help="write every SA read to this CSV")
    p.add_argument("--export-qubo", help="write the QUBO as 'k l value' triplets")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="run one closed-loop simulation")
    p.add_argument("--scenario", required=True)
    p.add_argument("--controller", choices=("fixed", "local", "exact", "sa"))
    p.add_argument("--beta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--events", help="write the tick,vehicle,event log here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gridsearch", help="choose beta for one flow")
    p.add_argument("--plan", required=True)
    p.add_argument("--flow", type=int, required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("experiment", help="run a full plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--plots", action="store_true", help="also write SVG charts")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("plot", help="charts from a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, KeyError) as exc:
        print(f"signalis: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
