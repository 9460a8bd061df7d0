"""Figures written next to the CSV/JSON reports. Uses the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from hisres.relevance import AttentionRecord  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_losses(losses: Sequence[float], path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(np.arange(1, len(losses) + 1), losses, marker="o", ms=3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean training loss")
    ax.set_yscale("log")
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_gate_histogram(means: dict[str, np.ndarray], path) -> Path:
    """One histogram per gate, e.g. {"recent": ..., "global": ...}."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    bins = np.linspace(0, 1, 41)
    for name, values in means.items():
        ax.hist(values, bins=bins, alpha=0.6, label=f"{name} (mean {np.mean(values):.3f})")
    ax.set_xlabel("per-entity mean gate value")
    ax.set_ylabel("entities")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def plot_attention(records: Sequence[AttentionRecord], path, max_objects: int = 12) -> Path:
    """Sorted edge weights for the objects with the most in-edges."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    busiest = sorted(records, key=lambda r: -len(r.edges))[:max_objects]
    for rec in busiest:
        w = np.sort([e[2] for e in rec.edges])[::-1]
        ax.plot(np.arange(1, len(w) + 1), w, marker=".", lw=1, label=str(rec.object_id))
    ax.set_xlabel("in-edge (sorted by weight)")
    ax.set_ylabel("attention weight")
    if busiest:
        ax.legend(title="object", frameon=False, fontsize=6, ncol=2)
    return _save(fig, path)


def plot_timings(rows: Sequence[tuple[str, str, float]], path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.2))
    phases = sorted({p for _, p, _ in rows})
    modules = sorted({m for m, _, _ in rows})
    width = 0.8 / max(len(phases), 1)
    lookup = {(m, p): s for m, p, s in rows}
    x = np.arange(len(modules))
    for i, phase in enumerate(phases):
        ax.bar(x + i * width, [lookup.get((m, phase), 0.0) for m in modules], width, label=phase)
    ax.set_xticks(x + width * (len(phases) - 1) / 2)
    ax.set_xticklabels(modules, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("seconds")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def plot_per_timestamp(per_timestamp: Sequence[dict], path, label: str = "model") -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    t = [row["time"] for row in per_timestamp]
    ax.plot(t, [row["mrr"] for row in per_timestamp], marker=".", label=label)
    ax.set_xlabel("timestamp")
    ax.set_ylabel("filtered MRR")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)
