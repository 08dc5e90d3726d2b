"""Sweep report output: delimited rows plus rendered metric figures."""

from __future__ import annotations

import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .pipeline import SweepRow


def format_row(row: SweepRow) -> list[str]:
    return [
        row.method,
        str(row.diameter),
        format(row.compactness, "g"),
        "none" if row.k is None else str(row.k),
        str(row.n_regions),
        f"{row.asa:.6f}",
        f"{row.recall:.6f}",
        f"{row.precision:.6f}",
        f"{row.f1:.6f}",
        str(row.runtime_ms),
    ]


def write_sweep_csv(rows: list[SweepRow], path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SweepRow.COLUMNS)
        for row in rows:
            writer.writerow(format_row(row))


def render_sweep_figures(rows: list[SweepRow], out_dir: str | os.PathLike) -> list[str]:
    """Plot ASA and boundary F1 against superpixel diameter, one curve per
    method/cluster-count series; returns the written file paths."""
    series: dict[str, list[SweepRow]] = defaultdict(list)
    for row in rows:
        name = row.method if row.k is None else f"{row.method} (k={row.k})"
        series[name].append(row)

    written = []
    for metric, fname, title in (
        ("asa", "sweep_asa.png", "Achievable segmentation accuracy"),
        ("f1", "sweep_f1.png", "Boundary F1"),
    ):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for name in sorted(series):
            pts = sorted((r.diameter, getattr(r, metric)) for r in series[name])
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=name)
        ax.set_xlabel("superpixel diameter [px]")
        ax.set_ylabel(metric.upper() if metric == "asa" else "boundary F1")
        ax.set_title(title)
        ax.set_ylim(0.0, 1.05)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        path = os.path.join(os.fspath(out_dir), fname)
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written
