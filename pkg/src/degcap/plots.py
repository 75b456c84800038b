"""Figure rendering for the report path.

Each experiment that writes delimited output can also render a matplotlib
figure next to it (same stem, .png).  The CSV/JSON files remain the data
contract; figures are a convenience view.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _save(fig, out_path: Path) -> Path:
    png = out_path.with_suffix(".png")
    fig.tight_layout()
    fig.savefig(png, dpi=150)
    plt.close(fig)
    return png


def survival_curve(rows, out_path: Path) -> Path:
    ts = [r["t"] for r in rows]
    a = [r["a_hat"] for r in rows]
    ci = [r["ci"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.errorbar(ts, a, yerr=ci, fmt="o-", capsize=3)
    ax.set_xlabel("t")
    ax.set_ylabel("survival probability")
    ax.set_ylim(bottom=0)
    ax.grid(alpha=0.3)
    return _save(fig, out_path)


def threshold_curve(rows, out_path: Path) -> Path:
    ts = [r["t"] for r in rows]
    lhs = [r["threshold_lhs"] for r in rows]
    q = [r["q_t"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot(ts, lhs, label="threshold lhs")
    ax.plot(ts, q, label="Q_t", ls="--")
    ax.axhline(1.0, color="gray", lw=0.8)
    ax.axhline(0.0, color="gray", lw=0.8)
    ax.set_xlabel("t")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, out_path)


def cmax_hist(values, out_path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.hist(values, bins=30)
    ax.set_xlabel("largest component / n")
    ax.set_ylabel("replicas")
    ax.grid(alpha=0.3)
    return _save(fig, out_path)


def extinction_profile(midpoints, q, out_path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot(midpoints, q, "o-")
    ax.set_xlabel("parent-edge label")
    ax.set_ylabel("extinction probability q(y)")
    ax.set_ylim(0, 1.05)
    ax.grid(alpha=0.3)
    return _save(fig, out_path)


def render_record(config, record, out_path) -> Path | None:
    """Pick a figure for the experiment; None when there is nothing to draw."""
    out_path = Path(out_path)
    rows = record.rows
    if not rows:
        return None
    exp = config.experiment
    if exp == "survival":
        return survival_curve(rows, out_path)
    if exp == "threshold-scan":
        return threshold_curve(rows, out_path)
    if exp in ("simulate", "equivalence", "giant-k5", "no-giant-k3"):
        vals = [r["c_max_over_n"] for r in rows if "c_max_over_n" in r]
        if not vals:
            vals = [r["c_max"] / config.n for r in rows if "c_max" in r]
        if vals:
            return cmax_hist(vals, out_path)
        return None
    if exp == "extinction" and "q" in record.extra:
        return extinction_profile(
            np.asarray(record.extra["midpoints"]), np.asarray(record.extra["q"]), out_path
        )
    return None
