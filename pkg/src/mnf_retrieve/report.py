"""Render figures from sweep and eigenvalue CSV output.

Everything here consumes the delimited files the CLI writes, so figures can
be regenerated without rerunning experiments.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ConfigError, DataFormatError

__all__ = ["render_sweep_figures", "render_eigenvalue_figure"]


def _read_csv(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"missing CSV {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def render_sweep_figures(results_csv, per_level_csv, out_dir) -> list[Path]:
    """Two figures: mean test RMSE vs component count, and the per-level RMSE
    profile at the largest component count.  Curves average over seeds, one
    line per (method, window)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    rows = [r for r in _read_csv(results_csv) if r["split"] == "test"]
    if not rows:
        raise ConfigError(f"{results_csv} holds no test rows")
    by_line = defaultdict(lambda: defaultdict(list))  # (method, w) -> k -> [rmse]
    for r in rows:
        by_line[(r["method"], int(r["w"]))][int(r["k"])].append(float(r["mean_rmse"]))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for (method, w), series in sorted(by_line.items()):
        ks = sorted(series)
        means = [np.mean(series[k]) for k in ks]
        ax.plot(ks, means, marker="o", label=f"{method.upper()}, {w}x{w}")
    ax.set_xlabel("components kept")
    ax.set_ylabel("mean test RMSE")
    ax.set_title("Retrieval error vs. components and neighborhood size")
    ax.grid(True, alpha=0.3)
    ax.legend()
    path = out / "mean_rmse_vs_k.png"
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    level_rows = _read_csv(per_level_csv)
    if level_rows:
        kmax = max(int(r["k"]) for r in level_rows)
        by_profile = defaultdict(lambda: defaultdict(list))  # (method, w) -> pressure -> [rmse]
        for r in level_rows:
            if int(r["k"]) != kmax:
                continue
            by_profile[(r["method"], int(r["w"]))][float(r["pressure"])].append(
                float(r["rmse"])
            )
        fig, ax = plt.subplots(figsize=(5, 6))
        for (method, w), series in sorted(by_profile.items()):
            pressures = sorted(series)
            means = [np.mean(series[p]) for p in pressures]
            ax.plot(means, pressures, label=f"{method.upper()}, {w}x{w}")
        ax.set_xlabel(f"test RMSE (k={kmax})")
        ax.set_ylabel("pressure [hPa]")
        ax.invert_yaxis()
        ax.grid(True, alpha=0.3)
        ax.legend()
        path = out / "rmse_profile.png"
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written


def render_eigenvalue_figure(curve_csv, out_path) -> Path:
    """Cumulative normalized eigenvalues (and MNF signal fractions when present)."""
    rows = _read_csv(curve_csv)
    if not rows:
        raise ConfigError(f"{curve_csv} is empty")
    idx = [int(r["index"]) + 1 for r in rows]
    cumulative = [float(r["cumulative"]) for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(idx, cumulative, marker=".", label="cumulative normalized eigenvalues")
    if "signal_fraction" in rows[0]:
        ax.plot(
            idx,
            [float(r["signal_fraction"]) for r in rows],
            marker=".",
            label="per-component signal fraction",
        )
    ax.set_xlabel("component")
    ax.set_ylabel("fraction")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_path
