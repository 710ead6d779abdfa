"""Figure rendering for verification reports and loop traces.

All figures are written straight to files; the Agg backend keeps this
headless-safe.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_STATUS_COLORS = {
    "Verified": "#2a9d48",
    "Refuted": "#d43d3d",
    "Unknown": "#e0a93c",
    "Timeout": "#8d6cab",
    "SolverError": "#5a5a5a",
    "Deferred": "#4a7fb5",
}


def plot_verdicts(doc: dict, out_path) -> Path:
    """Bar charts of obligation counts by verdict and by property type."""
    totals = doc["totals"]
    by_status = totals["by_status"]
    by_ptype = totals["by_ptype"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))

    names = [s for s in _STATUS_COLORS if s in by_status]
    ax1.bar(
        names,
        [by_status[s] for s in names],
        color=[_STATUS_COLORS[s] for s in names],
    )
    ax1.set_title("obligations by verdict")
    ax1.set_ylabel("count")
    for i, s in enumerate(names):
        ax1.text(i, by_status[s], str(by_status[s]), ha="center", va="bottom")

    ptypes = sorted(by_ptype)
    ax2.bar(ptypes, [by_ptype[p] for p in ptypes], color="#4a7fb5")
    ax2.set_title("obligations by property type")
    for i, p in enumerate(ptypes):
        ax2.text(i, by_ptype[p], str(by_ptype[p]), ha="center", va="bottom")

    fig.suptitle(Path(doc["source"]).name or doc["source"])
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_traces(grouped: dict[str, Sequence], out_path) -> Path:
    """Watched-variable trajectories per loop, one subplot per loop.

    ``grouped`` maps a loop identifier to the traces recorded for it (one
    trace per concrete run).
    """
    loops = [lid for lid, trs in grouped.items() if trs]
    if not loops:
        raise ValueError("no traces to plot")
    fig, axes = plt.subplots(
        len(loops), 1, figsize=(7, 3.2 * len(loops)), squeeze=False
    )
    for ax, lid in zip((a for row in axes for a in row), loops):
        traces = grouped[lid]
        watched = traces[0].watched
        for run_idx, tr in enumerate(traces):
            iters = [i for i, _ in tr.rows]
            for v_idx, name in enumerate(watched):
                ax.plot(
                    iters,
                    [vals[v_idx] for _, vals in tr.rows],
                    marker="o",
                    markersize=3,
                    label=f"{name} (run {run_idx})",
                )
        ax.set_title(f"loop {lid}")
        ax.set_xlabel("iteration")
        if len(traces) * len(watched) <= 8:
            ax.legend(fontsize="small")
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
