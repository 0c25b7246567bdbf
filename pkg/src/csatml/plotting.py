"""Static figures written next to the CSV reports (Agg backend, no display)."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (math.sqrt(5) - 1.0) / 2.0
RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
    # fixed metadata keeps repeated renders byte-stable
    "svg.hashsalt": "csatml",
}


def _figure(width: float = 4.5, height: float | None = None):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(width, height or width * GOLDEN))
    return fig, ax


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(RC):
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_traces(traces, path, n_samples: int = 2048) -> Path:
    """Received energy over the first ``n_samples`` of each trace."""
    fig, ax = _figure(6.0)
    for t in traces:
        v = t.values[:n_samples]
        ax.plot(np.arange(len(v)) / t.sample_rate, v, lw=0.6, label=f"{t.label} AP")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("energy (dBm)")
    ax.legend(loc="lower right")
    return _save(fig, path)


def plot_training(report, path) -> Path:
    epochs = [r.epoch for r in report.history]
    fig, ax = _figure()
    ax.plot(epochs, [r.train_loss for r in report.history], color="k", lw=1, label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax2 = ax.twinx()
    ax2.plot(epochs, [r.train_acc for r in report.history], "--", lw=1, label="train acc")
    ax2.plot(epochs, [r.test_acc for r in report.history], lw=1, label="test acc")
    ax2.set_ylabel("accuracy")
    ax2.set_ylim(0, 1.02)
    ax2.grid(False)
    ax2.legend(loc="center right")
    return _save(fig, path)


def plot_sweep(rows: Sequence, path) -> Path:
    """Test accuracy against chunk width (log2 axis), one line per class count."""
    fig, ax = _figure()
    for k in sorted({r.k for r in rows}):
        pts = sorted((r.w, r.test_accuracy) for r in rows if r.k == k)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", ms=3, lw=1, label=f"k={k}")
        ax.axhline(1.0 / k, color="0.6", lw=0.7, ls=":")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("chunk width w (samples)")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower right")
    return _save(fig, path)


def plot_comparison(rows: Sequence, path) -> Path:
    """Grouped bars of per-scenario detection accuracy by method."""
    scenarios = sorted({(r.sight, r.scenario) for r in rows})
    methods = [m for m in dict.fromkeys(r.method for r in rows)
               if any(not math.isnan(r.accuracy) for r in rows if r.method == m)]
    fig, ax = _figure(6.0)
    width = 0.8 / max(len(methods), 1)
    x = np.arange(len(scenarios))
    for i, m in enumerate(methods):
        acc = {(r.sight, r.scenario): r.accuracy for r in rows if r.method == m}
        ax.bar(x + (i - (len(methods) - 1) / 2) * width,
               [100 * acc.get(s, np.nan) for s in scenarios], width, label=m)
    ax.set_xticks(x)
    ax.set_xticklabels([f"{sight}\nCase {case}" for sight, case in scenarios])
    ax.set_ylabel("successful detection (%)")
    ax.set_ylim(0, 105)
    ax.legend(loc="lower right", ncol=len(methods))
    return _save(fig, path)
