"""Static SVG charts of an experiment's results CSV."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .experiment import aggregate, read_results

__all__ = ["plot_results"]

_ORDER = ("fixed", "local", "exact", "sa")
_LABELS = {"fixed": "Fixed", "local": "Local", "exact": "Exact", "sa": "SA"}


def _bars(ax, flows, kinds, table, scale=1.0):
    width = 0.8 / max(1, len(kinds))
    x = np.arange(len(flows))
    for n, kind in enumerate(kinds):
        mean = [table.get((f, kind), (np.nan, np.nan))[0] * scale for f in flows]
        err = [table.get((f, kind), (np.nan, np.nan))[1] * scale for f in flows]
        err = [0.0 if np.isnan(e) else e for e in err]
        ax.bar(x + (n - (len(kinds) - 1) / 2) * width, mean, width, yerr=err, capsize=3,
               label=_LABELS.get(kind, kind))
    ax.set_xticks(x, [str(f) for f in flows])
    ax.set_xlabel("initial vehicles")
    ax.legend()


def plot_results(results_csv: str | Path, out_dir: str | Path) -> list[Path]:
    """Write waiting-time, energy-error, census and solver-time bar charts.

    Bars are means over instances with standard-error whiskers. Returns the
    written paths.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_results(results_csv)
    agg = aggregate(rows)
    flows = sorted({r["flow"] for r in rows})
    present = {r["controller"] for r in rows}
    kinds = [k for k in _ORDER if k in present]
    optimized = [k for k in kinds if k != "fixed"]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def save(fig, name):
        path = out / name
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    _bars(ax, flows, kinds, agg.waiting, scale=1 / 3600)
    ax.set_ylabel("total waiting time [h]")
    save(fig, "waiting_time.svg")

    approx = [k for k in optimized if k != "exact"]
    if approx:
        fig, ax = plt.subplots(figsize=(7, 4))
        _bars(ax, flows, approx, agg.rel_energy_error, scale=100)
        ax.set_ylabel("relative energy error [%]")
        save(fig, "energy_error.svg")

    if optimized:
        kind = "exact" if "exact" in optimized else optimized[0]
        fig, ax = plt.subplots(figsize=(7, 4))
        x = np.arange(len(flows))
        zero = [agg.zero_terms.get((f, kind), (np.nan, 0))[0] for f in flows]
        nonzero = [agg.nonzero_terms.get((f, kind), (np.nan, 0))[0] for f in flows]
        ax.bar(x - 0.2, zero, 0.4, label="zero")
        ax.bar(x + 0.2, nonzero, 0.4, label="nonzero")
        ax.set_xticks(x, [str(f) for f in flows])
        ax.set_xlabel("initial vehicles")
        ax.set_ylabel("first-order terms per step")
        ax.legend()
        save(fig, "first_order_census.svg")

        fig, ax = plt.subplots(figsize=(7, 4))
        _bars(ax, flows, optimized, agg.solver_ms)
        ax.set_ylabel("solver time per step [ms]")
        save(fig, "solver_time.svg")
    return written
