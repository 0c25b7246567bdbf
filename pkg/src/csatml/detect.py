"""Chunk classifiers (trained network and energy detection) and detection metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataprep import NormStats, prepare_chunks
from .nn.functional import softmax
from .nn.layers import Sequential

# Threshold of the energy detector in the original RF testbed; synthetic runs recalibrate.
REFERENCE_ED_THRESHOLD_DBM = -42.0
ED_GRID_STEP_DB = 0.1


@dataclass(frozen=True)
class Prediction:
    probabilities: np.ndarray
    label: int
    chunk_width: int


@dataclass(frozen=True)
class EdThresholds:
    cuts: tuple[float, ...]

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cuts)
        object.__setattr__(self, "cuts", cuts)
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError(f"ED cut points must be strictly increasing, got {cuts}")


@dataclass(frozen=True)
class DetectionReport:
    accuracy: float
    p_d: float
    p_fa: float
    tp: int
    fn: int
    fp: int
    tn: int


def ml_classify(model: Sequential, chunk, stats: NormStats) -> Prediction:
    """Clamp and normalize with the training statistics, then run the network."""
    raw = np.asarray(chunk, dtype=np.float64)
    width = getattr(getattr(model, "spec", None), "w", None)
    if raw.ndim != 1 or (width is not None and raw.size != width):
        raise ValueError(f"chunk of length {raw.size} does not match model width {width}")
    x = prepare_chunks(raw, stats)[None, :].astype(model.dtype)
    logits = model.forward(x, train=False)[0].astype(np.float64)
    probs = softmax(logits)
    return Prediction(probs, int(np.argmax(probs)), raw.size)


def ml_classify_batch(model: Sequential, chunks, stats: NormStats,
                      batch_size: int = 256) -> np.ndarray:
    """Labels for many raw chunks at once; same arithmetic as ml_classify."""
    raw = np.asarray(chunks, dtype=np.float64)
    out = []
    for start in range(0, len(raw), batch_size):
        x = prepare_chunks(raw[start:start + batch_size], stats).astype(model.dtype)
        out.append(model.forward(x, train=False).argmax(axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


# -- energy detection --------------------------------------------------------

def chunk_energy(chunks) -> np.ndarray:
    """ED statistic: mean dBm over each chunk (last axis)."""
    return np.asarray(chunks, dtype=np.float64).mean(axis=-1)


def ed_classify(chunk, thresholds: EdThresholds) -> int:
    """Number of cut points at or below the chunk's mean dBm (ties go to the higher class)."""
    return int(np.searchsorted(thresholds.cuts, float(chunk_energy(chunk)), side="right"))


def ed_classify_batch(chunks, thresholds: EdThresholds) -> np.ndarray:
    return np.searchsorted(thresholds.cuts, chunk_energy(chunks), side="right")


def _correct_per_cut(energy, labels, k, grid, weights):
    """below[c, g] = total weight of class-c chunks whose energy is < grid[g]."""
    below = np.empty((k, len(grid)), dtype=np.float64)
    for c in range(k):
        mask = labels == c
        order = np.argsort(energy[mask], kind="stable")
        e = energy[mask][order]
        cum = np.concatenate([[0.0], np.cumsum(weights[mask][order])])
        below[c] = cum[np.searchsorted(e, grid, side="left")]
    return below


def ed_accuracy(energy, labels, cuts, weights=None) -> float:
    pred = np.searchsorted(np.asarray(cuts, dtype=np.float64), energy, side="right")
    return float(np.average(pred == labels, weights=weights))


def calibrate_ed_thresholds(chunks, labels, k: int, step: float = ED_GRID_STEP_DB,
                            balanced: bool = False) -> EdThresholds:
    """Cut points on a 0.1 dB grid that maximize training accuracy of the mean-energy rule.

    Solved exactly by dynamic programming over the grid; each cut is then moved
    to the middle of the run of grid points that keep the optimum.  With
    ``balanced`` every class carries equal total weight.
    """
    if k < 2:
        raise ValueError(f"need at least 2 classes for ED thresholds, got k={k}")
    energy = chunk_energy(chunks)
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.array([np.sum(labels == c) for c in range(k)])
    if np.any(counts == 0):
        raise ValueError(f"every class needs chunks to calibrate ED, got counts {counts.tolist()}")
    weights = (1.0 / counts[labels]) if balanced else np.ones(len(labels))
    lo = math.floor(energy.min() / step) * step
    hi = math.ceil(energy.max() / step) * step + step
    n_grid = int(round((hi - lo) / step)) + 1
    if n_grid < k - 1:
        n_grid = k - 1
    grid = lo + step * np.arange(n_grid)
    below = _correct_per_cut(energy, labels, k, grid, weights)
    totals = np.array([weights[labels == c].sum() for c in range(k)])

    # best[j][g]: most correct chunks of classes < j+1 with cut j placed at grid[g]
    best = below[0].astype(np.float64)
    choice = []
    for c in range(1, k - 1):
        prev = best - below[c]
        run_max = np.full(n_grid, -np.inf)
        run_arg = np.zeros(n_grid, dtype=np.int64)
        # strict ordering: cut c-1 at g' < g
        m, a = -np.inf, 0
        for g in range(n_grid):
            run_max[g], run_arg[g] = m, a
            if prev[g] > m:
                m, a = prev[g], g
        choice.append(run_arg)
        best = run_max + below[c]
    total = best - below[k - 1] + totals[k - 1]
    g = int(np.argmax(total))
    idx = [g]
    for run_arg in reversed(choice):
        g = int(run_arg[g])
        idx.append(g)
    idx = idx[::-1]

    cuts = [float(grid[i]) for i in idx]
    target = ed_accuracy(energy, labels, cuts, weights)
    for j in range(len(cuts)):
        lo_i = idx[j - 1] + 1 if j > 0 else 0
        hi_i = idx[j + 1] - 1 if j + 1 < len(idx) else n_grid - 1
        ok = []
        for i in range(lo_i, hi_i + 1):
            trial = cuts[:j] + [float(grid[i])] + cuts[j + 1:]
            ok.append(ed_accuracy(energy, labels, trial, weights) >= target - 1e-12)
        ok = np.array(ok)
        # contiguous run of optimal grid points containing the DP choice
        pos = idx[j] - lo_i
        left = pos
        while left > 0 and ok[left - 1]:
            left -= 1
        right = pos
        while right + 1 < len(ok) and ok[right + 1]:
            right += 1
        idx[j] = lo_i + (left + right) // 2
        cuts[j] = float(np.round(grid[idx[j]], 6))
    return EdThresholds(tuple(cuts))


# -- metrics ---------------------------------------------------------------------

def _ratio(num: int, den: int) -> float:
    return num / den if den else float("nan")


def detection_metrics(predictions, labels, target: int) -> DetectionReport:
    """P_D = TP/(TP+FN) and P_FA = FP/(FP+TN) for one target class, plus overall accuracy."""
    pred = np.asarray(predictions, dtype=np.int64)
    true = np.asarray(labels, dtype=np.int64)
    if pred.shape != true.shape:
        raise ValueError(f"{pred.shape} predictions vs {true.shape} labels")
    is_t, said_t = true == target, pred == target
    tp = int(np.sum(is_t & said_t))
    fn = int(np.sum(is_t & ~said_t))
    fp = int(np.sum(~is_t & said_t))
    tn = int(np.sum(~is_t & ~said_t))
    accuracy = float(np.mean(pred == true)) if len(true) else float("nan")
    return DetectionReport(accuracy, _ratio(tp, tp + fn), _ratio(fp, fp + tn), tp, fn, fp, tn)
