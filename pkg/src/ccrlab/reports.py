"""Report emission: delimited output, JSON reports, and companion figures.

Every CSV-emitting CLI command can also render a matplotlib figure next to
its data file (same stem, ``.png``).  Numbers are written with ``repr`` so
identical runs produce byte-identical files.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "write_csv",
    "write_json",
    "figure_path",
    "render_series",
    "render_sandwich",
    "render_sweep",
]

_VERDICT_COLORS = {
    "TypeI": "#3465a4",
    "TypeIII": "#cc0000",
    "Inconclusive": "#babdb6",
}


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def figure_path(output) -> Path:
    return Path(output).with_suffix(".png")


def _new_axes(title: str):
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=110)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": "ccrlab"})
    plt.close(fig)
    return path


def render_series(
    path,
    x,
    series: dict,
    title: str,
    xlabel: str,
    ylabel: str,
    logx: bool = False,
    logy: bool = False,
) -> Path:
    """Line plot of one or more named series against a common abscissa."""
    fig, ax = _new_axes(title)
    for label, ys in series.items():
        ax.plot(x, ys, marker="o", markersize=3, linewidth=1.2, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend(frameon=False)
    return _save(fig, path)


def render_sandwich(path, rows) -> Path:
    """Log-log view of the measure against its lower/upper envelopes."""
    xs = [r[0] for r in rows]
    fig, ax = _new_axes("symmetric-difference measure and envelopes")
    ax.plot(xs, [r[1] for r in rows], "--", color="#888", label="lower bound")
    ax.plot(xs, [r[3] for r in rows], "--", color="#444", label="upper bound")
    ax.plot(xs, [r[2] for r in rows], color="#cc0000", linewidth=1.4, label="measure")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("shift x")
    ax.set_ylabel("|(U+x) ⊖ U|")
    ax.legend(frameon=False)
    return _save(fig, path)


def render_sweep(path, rows) -> Path:
    """Phase diagram of sweep verdicts with the expected boundary line."""
    fig, ax = _new_axes("type classification sweep")
    seen = []
    for beta, gamma, verdict, *_ in rows:
        color = _VERDICT_COLORS.get(verdict, "#555")
        label = verdict if verdict not in seen else None
        seen.append(verdict)
        ax.scatter([beta], [gamma], c=color, s=140, marker="s", label=label)
    betas = np.linspace(
        min(r[0] for r in rows), max(r[0] for r in rows), 64
    )
    ax.plot(betas, 1.0 - 2.0 * betas, "k--", linewidth=1.0, label="gamma = 1 - 2 beta")
    ax.set_xlabel("beta")
    ax.set_ylabel("gamma")
    ax.legend(frameon=False, loc="upper right", fontsize=8)
    return _save(fig, path)
