"""Figure rendering for the report path.

Every evaluate/sweep/convergence command writes these PNGs next to its CSV
tables; the drawing code only consumes the same report/artifact objects the
CSV writers do.
"""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .artifacts import RunArtifact, SweepResult
from .criteria import ObjectiveVector
from .evaluation import EvaluationReport


def _finite(values, fallback=0.0):
    arr = np.asarray(values, dtype=float)
    return np.where(np.isfinite(arr), arr, fallback)


def render_front(
    report: EvaluationReport,
    path,
    benchmark_points: dict[str, ObjectiveVector] | None = None,
    axes: tuple[int, int] = (0, 1),
) -> None:
    """Scatter of the archive in objective space with benchmark markers."""
    i, j = axes
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    obj = report.objectives
    ax.scatter(obj[:, i], obj[:, j], s=22, c="tab:blue", label="non-dominated set")
    best = report.best_index
    ax.scatter(
        obj[best, i], obj[best, j], s=70, marker="*", c="tab:red", label="best mean SIR"
    )
    markers = {"mse": "s", "combined": "D"}
    for name, point in (benchmark_points or {}).items():
        ax.scatter(
            point.values[i],
            point.values[j],
            s=55,
            marker=markers.get(name, "x"),
            label=name,
        )
    ax.set_xlabel(f"criterion {i + 1}")
    ax.set_ylabel(f"criterion {j + 1}")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_sir_curves(report: EvaluationReport, path) -> None:
    """Per-source SIR against the criterion-ordered archive position."""
    order = report.ordering
    table = report.per_solution_sir[order]
    positions = np.arange(len(order))
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for col in range(table.shape[1]):
        ax.plot(positions, _finite(table[:, col]), marker="o", ms=3, label=f"source {col + 1}")
    ax.plot(
        positions,
        _finite(report.mean_sir[order]),
        ls="--",
        c="k",
        lw=1,
        label="mean",
    )
    ax.set_xlabel("solution (ordered by criterion)")
    ax.set_ylabel("SIR [dB]")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_estimates(columns: dict[str, np.ndarray], path, max_points: int = 2000) -> None:
    """Stacked waveform panels, one per named signal."""
    names = list(columns)
    fig, axes = plt.subplots(len(names), 1, figsize=(7.5, 1.6 * len(names)), sharex=True)
    if len(names) == 1:
        axes = [axes]
    for ax, name in zip(axes, names):
        data = np.asarray(columns[name], dtype=float)
        stride = max(1, len(data) // max_points)
        ax.plot(np.arange(0, len(data), stride), data[::stride], lw=0.7)
        ax.set_ylabel(name, fontsize=7)
    axes[-1].set_xlabel("t [samples]")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_convergence(artifact: RunArtifact, path, axes: tuple[int, int] = (0, 1)) -> None:
    """Archive objective clouds across snapshots, colored by iteration."""
    if len(artifact.snapshots) < 2:
        raise ValueError("need at least 2 snapshots to draw convergence")
    i, j = axes
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    iterations = [s.iteration for s in artifact.snapshots]
    cmap = plt.get_cmap("viridis")
    lo, hi = min(iterations), max(iterations)
    for snap in artifact.snapshots:
        frac = 0.0 if hi == lo else (snap.iteration - lo) / (hi - lo)
        feasible = ~snap.penalized
        ax.scatter(
            snap.objectives[feasible, i],
            snap.objectives[feasible, j],
            s=14,
            color=cmap(frac),
            label=f"iter {snap.iteration}",
        )
        if snap.penalized.any():
            ax.scatter(
                snap.objectives[snap.penalized, i],
                snap.objectives[snap.penalized, j],
                s=14,
                marker="x",
                color=cmap(frac),
            )
    ax.set_xlabel(f"criterion {i + 1}")
    ax.set_ylabel(f"criterion {j + 1}")
    if len(iterations) <= 8:
        ax.legend(loc="best", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_sweep(result: SweepResult, path) -> None:
    """Mean SIR curves against the SNR grid."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    grid = result.snr_grid_db
    styles = {
        "mse": dict(ls="--", c="k"),
        "combined": dict(ls="-", c="tab:red"),
        "best": dict(ls="-", c="tab:blue"),
        "average": dict(ls="-", c="tab:cyan"),
        "worst": dict(ls=":", c="tab:gray"),
    }
    for name, values in result.curves.items():
        ax.plot(grid, _finite(values, np.nan), marker="o", ms=3, label=name, **styles.get(name, {}))
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel("mean SIR [dB]")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
