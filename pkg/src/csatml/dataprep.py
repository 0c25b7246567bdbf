"""Chunking, outlier clamping, normalization and UCR-style dataset files."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .sim import EnergyTrace

OUTLIER_SIGMAS = 4.0
META_VERSION = 1


@dataclass(frozen=True)
class Chunk:
    values: np.ndarray
    label: int


@dataclass(frozen=True)
class NormStats:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")


@dataclass
class Dataset:
    """Normalized train/test chunks.

    ``classes[i]`` is the AP count that class index ``i`` stands for.
    """

    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    k: int
    w: int
    stats: NormStats
    seed: int = 0
    classes: tuple[int, ...] = ()
    # provenance: index of the source trace and offset of each chunk (not serialized)
    train_src: np.ndarray | None = None
    train_off: np.ndarray | None = None
    test_src: np.ndarray | None = None
    test_off: np.ndarray | None = None

    def __post_init__(self):
        if not self.classes:
            self.classes = tuple(range(self.k))

    @property
    def train(self) -> list[Chunk]:
        return [Chunk(x, int(y)) for x, y in zip(self.train_x, self.train_y)]

    @property
    def test(self) -> list[Chunk]:
        return [Chunk(x, int(y)) for x, y in zip(self.test_x, self.test_y)]


def chunk_stride(w: int) -> int:
    if w < 4:
        return 1
    if w % 4:
        raise ValueError(f"chunk width {w} must be divisible by 4")
    return w // 4


def chunk_offsets(n: int, w: int) -> np.ndarray:
    if w < 1:
        raise ValueError(f"chunk width must be >= 1, got {w}")
    if n < w:
        raise ValueError(f"trace of {n} samples is shorter than chunk width {w}")
    stride = chunk_stride(w)
    return np.arange(0, n - w + 1, stride)


def chunk_trace(trace: EnergyTrace | np.ndarray, w: int) -> list[tuple[int, np.ndarray]]:
    """Windows of width ``w`` overlapping by three quarters; trailing samples are dropped."""
    values = trace.values if isinstance(trace, EnergyTrace) else np.asarray(trace, float)
    return [(int(o), values[o:o + w]) for o in chunk_offsets(len(values), w)]


def chunk_matrix(values: np.ndarray, w: int) -> np.ndarray:
    """Same windows as chunk_trace, stacked into an (n_chunks, w) array."""
    values = np.asarray(values, dtype=np.float64)
    offsets = chunk_offsets(len(values), w)
    return np.lib.stride_tricks.sliding_window_view(values, w)[offsets].copy()


def compute_norm_stats(values) -> NormStats:
    """Mean and population standard deviation over every value given."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 2:
        raise ValueError("need at least 2 values to compute normalization stats")
    mu = float(np.mean(v))
    sigma = float(np.sqrt(np.mean((v - mu) ** 2)))
    if sigma == 0.0:
        raise ValueError("training values have zero variance")
    return NormStats(mu, sigma)


def clamp_outliers(values, stats: NormStats) -> np.ndarray:
    """Replace values deviating from mu by more than 4 sigma with mu."""
    v = np.asarray(values, dtype=np.float64)
    return np.where(np.abs(v - stats.mu) > OUTLIER_SIGMAS * stats.sigma, stats.mu, v)


def count_outliers(values, stats: NormStats) -> int:
    v = np.asarray(values, dtype=np.float64)
    return int(np.count_nonzero(np.abs(v - stats.mu) > OUTLIER_SIGMAS * stats.sigma))


def normalize(values, stats: NormStats) -> np.ndarray:
    return (np.asarray(values, dtype=np.float64) - stats.mu) / stats.sigma


def denormalize(values, stats: NormStats) -> np.ndarray:
    return np.asarray(values, dtype=np.float64) * stats.sigma + stats.mu


def prepare_chunks(raw, stats: NormStats) -> np.ndarray:
    """Clamp in the dBm domain, then z-score; used for training data and at inference."""
    return normalize(clamp_outliers(raw, stats), stats)


def class_map(labels: Sequence[int]) -> dict[int, int]:
    """AP count -> class index, enumerating the distinct counts from 0."""
    return {ap: i for i, ap in enumerate(sorted(set(int(x) for x in labels)))}


def build_dataset(traces: Sequence[EnergyTrace], w: int, k: int, seed: int = 0,
                  max_chunks_per_class: int | None = None) -> Dataset:
    """Chunk, shuffle, split 50/50, clamp and normalize with train-half statistics.

    Trace labels are AP counts; they are mapped to class indices 0..k-1 in
    increasing order.  ``max_chunks_per_class`` keeps the first chunks of each
    class in shuffled order, which bounds dataset size at small widths.
    """
    if not traces:
        raise ValueError("no traces given")
    mapping = class_map([t.label for t in traces])
    if len(mapping) != k:
        raise ValueError(
            f"expected {k} classes but traces carry {len(mapping)} "
            f"(AP counts {sorted(mapping)})")

    blocks, labels, srcs, offs = [], [], [], []
    for i, trace in enumerate(traces):
        m = chunk_matrix(trace.values, w)
        blocks.append(m)
        labels.append(np.full(len(m), mapping[trace.label], dtype=np.int64))
        srcs.append(np.full(len(m), i, dtype=np.int64))
        offs.append(chunk_offsets(len(trace.values), w))
    x = np.concatenate(blocks)
    y = np.concatenate(labels)
    src = np.concatenate(srcs)
    off = np.concatenate(offs)

    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(x))
    if max_chunks_per_class is not None:
        keep = np.zeros(len(order), dtype=bool)
        shuffled_y = y[order]
        for c in range(k):
            keep[np.flatnonzero(shuffled_y == c)[:max_chunks_per_class]] = True
        order = order[keep]
    x, y, src, off = x[order], y[order], src[order], off[order]

    n_train = (len(x) + 1) // 2
    train_x, test_x = x[:n_train], x[n_train:]
    train_y, test_y = y[:n_train], y[n_train:]
    for name, part in (("train", train_y), ("test", test_y)):
        missing = set(range(k)) - set(part.tolist())
        if missing:
            raise ValueError(f"{name} half has no chunks of class(es) {sorted(missing)}")

    stats = compute_norm_stats(train_x)
    return Dataset(prepare_chunks(train_x, stats), train_y,
                   prepare_chunks(test_x, stats), test_y,
                   k=k, w=w, stats=stats, seed=seed,
                   classes=tuple(sorted(mapping)),
                   train_src=src[:n_train], train_off=off[:n_train],
                   test_src=src[n_train:], test_off=off[n_train:])


# -- UCR-style files -----------------------------------------------------------

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _write_split(path: Path, x: np.ndarray, y: np.ndarray) -> None:
    with path.open("w") as fh:
        for row, label in zip(x, y):
            fh.write(f"{int(label)}," + ",".join(_fmt(v) for v in row) + "\n")


def _read_split(path: Path, w: int) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            xs.append(parse_line(line, w, f"{path.name}:{lineno}"))
            ys.append(xs[-1].label)
    x = np.array([c.values for c in xs], dtype=np.float64).reshape(len(xs), w)
    return x, np.array(ys, dtype=np.int64)


def parse_line(line: str, w: int, where: str = "line") -> Chunk:
    """Parse ``label,v1,...,vw``."""
    fields = line.strip().split(",")
    if len(fields) != w + 1:
        raise ValueError(f"{where}: expected {w + 1} fields (label + {w} values), got {len(fields)}")
    try:
        label = int(fields[0])
        values = np.array([float(f) for f in fields[1:]])
    except ValueError:
        raise ValueError(f"{where}: non-numeric field") from None
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{where}: non-finite value")
    return Chunk(values, label)


def dataset_paths(prefix) -> tuple[Path, Path, Path]:
    prefix = Path(prefix)
    name = prefix.name
    return (prefix.with_name(f"{name}_TRAIN"), prefix.with_name(f"{name}_TEST"),
            prefix.with_name(f"{name}_META.json"))


def write_dataset(dataset: Dataset, prefix) -> None:
    """Write ``<prefix>_TRAIN``, ``<prefix>_TEST`` and ``<prefix>_META.json``."""
    train_p, test_p, meta_p = dataset_paths(prefix)
    train_p.parent.mkdir(parents=True, exist_ok=True)
    _write_split(train_p, dataset.train_x, dataset.train_y)
    _write_split(test_p, dataset.test_x, dataset.test_y)
    meta = {"version": META_VERSION, "w": dataset.w, "k": dataset.k,
            "mu": dataset.stats.mu, "sigma": dataset.stats.sigma,
            "seed": dataset.seed, "classes": list(dataset.classes)}
    meta_p.write_text(json.dumps(meta, indent=2) + "\n")


def read_dataset(prefix) -> Dataset:
    train_p, test_p, meta_p = dataset_paths(prefix)
    meta = json.loads(meta_p.read_text())
    w, k = int(meta["w"]), int(meta["k"])
    train_x, train_y = _read_split(train_p, w)
    test_x, test_y = _read_split(test_p, w)
    for name, y in (("train", train_y), ("test", test_y)):
        if y.size and (y.min() < 0 or y.max() >= k):
            raise ValueError(f"{name} split has labels outside [0, {k})")
    return Dataset(train_x, train_y, test_x, test_y, k=k, w=w,
                   stats=NormStats(float(meta["mu"]), float(meta["sigma"])),
                   seed=int(meta.get("seed", 0)),
                   classes=tuple(meta.get("classes", range(k))))
