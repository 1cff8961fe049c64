"""Matplotlib rendering of report figures, written next to the CSV files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _style(ax):
    ax.grid(True, which="both", alpha=0.3, linewidth=0.5)
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)


def render_rank_sweep(path, rows, method: str, title: str = "") -> None:
    """Error-versus-rank curves: per-rank mean with min/max spread, plus the
    pointwise truncated-SVD reference."""
    ranks = [row["rank"] for row in rows]
    mean = [row["mean_l2"] for row in rows]
    lo = [row["mean_l2"] - row["min_l2"] for row in rows]
    hi = [row["max_l2"] - row["mean_l2"] for row in rows]
    best = [row["best_l2"] for row in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.errorbar(ranks, mean, yerr=[lo, hi], marker="o", capsize=3,
                label=method, color="tab:blue")
    ax.plot(ranks, best, marker="s", linestyle="--", color="black",
            label="truncated SVD")
    ax.set_xlabel("target rank")
    ax.set_ylabel("L2 error")
    ax.set_yscale("log")
    if title:
        ax.set_title(title)
    ax.legend()
    _style(ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_bench(path, rows, title: str = "") -> None:
    """Grouped bar chart of wall times per method and phase."""
    methods = sorted({row["method"] for row in rows})
    phases = sorted({row["phase"] for row in rows})
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    width = 0.8 / max(1, len(phases))
    for i, phase in enumerate(phases):
        xs, ys = [], []
        for j, m in enumerate(methods):
            secs = [row["seconds"] for row in rows
                    if row["method"] == m and row["phase"] == phase]
            if secs:
                xs.append(j + (i - (len(phases) - 1) / 2.0) * width)
                ys.append(sum(secs))
        ax.bar(xs, ys, width=width, label=phase)
    ax.set_xticks(range(len(methods)))
    ax.set_xticklabels(methods)
    ax.set_ylabel("seconds")
    if title:
        ax.set_title(title)
    ax.legend()
    _style(ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
