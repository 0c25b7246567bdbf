"""FC2, VGG1D and FCN classifiers with the training and evaluation loops."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataprep import Dataset
from .nn.functional import softmax_cross_entropy
from .nn.layers import (BatchNorm1d, Conv1d, Flatten, GlobalAvgPool, Linear, MaxPool1d, ReLU,
                        Sequential)
from .nn.optim import SGD, Adam, PlateauScheduler

log = logging.getLogger(__name__)

FAMILIES = ("FC2", "VGG1D", "FCN")
VGG_DEPTHS = (4, 5, 6, 7)
FCN_BLOCKS = ((128, 8), (256, 5), (128, 3))
FC2_HIDDEN = 128
VGG_BASE_CHANNELS = 64
VGG_HIDDEN = 128


@dataclass(frozen=True)
class ModelSpec:
    family: str
    w: int
    k: int
    vgg_layers: int = 6
    hidden: int = FC2_HIDDEN

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unsupported model family {self.family!r}; choose from {FAMILIES}")
        if self.w < 1:
            raise ValueError(f"chunk width must be >= 1, got {self.w}")
        if self.k < 2:
            raise ValueError(f"need at least 2 classes, got {self.k}")
        if self.family == "VGG1D" and self.vgg_layers not in VGG_DEPTHS:
            raise ValueError(f"VGG1D weight-layer count must be one of {VGG_DEPTHS}, "
                             f"got {self.vgg_layers}")


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "SGD"
    lr: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 32
    epochs: int = 100
    patience: int = 50
    factor: float = 0.5
    seed: int = 0
    # stop as soon as test accuracy reaches this value (None: run every epoch)
    target_accuracy: float | None = None

    def __post_init__(self):
        if self.optimizer not in ("SGD", "Adam"):
            raise ValueError(f"optimizer must be SGD or Adam, got {self.optimizer!r}")
        for name in ("lr", "batch_size", "epochs", "patience", "factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.momentum < 0 or self.weight_decay < 0:
            raise ValueError("momentum and weight_decay must be non-negative")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float
    lr: float


@dataclass
class TrainReport:
    history: list[EpochRecord] = field(default_factory=list)
    initial_loss: float = float("nan")
    wall_time: float = 0.0
    best_epoch: int = 0
    best_test_accuracy: float = 0.0
    best_state: dict | None = field(default=None, repr=False)
    checkpoint: str | None = None

    @property
    def final_test_accuracy(self) -> float:
        return self.history[-1].test_acc if self.history else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "train_acc", "test_acc", "lr"])
        for r in self.history:
            writer.writerow([r.epoch, f"{r.train_loss:.8f}", f"{r.train_acc:.6f}",
                             f"{r.test_acc:.6f}", f"{r.lr:.8g}"])
        return buf.getvalue()


@dataclass
class Evaluation:
    accuracy: float
    confusion: np.ndarray  # rows: true class, columns: predicted class
    predictions: np.ndarray


# -- architectures -----------------------------------------------------------

def _fcn(spec: ModelSpec, rng, dtype):
    layers, c = [], 1
    for filters, kernel in FCN_BLOCKS:
        layers += [Conv1d(c, filters, kernel, "same", rng, dtype), BatchNorm1d(filters, dtype=dtype),
                   ReLU()]
        c = filters
    layers += [GlobalAvgPool(), Linear(c, spec.k, rng, he=False, dtype=dtype)]
    return layers


def _fc2(spec: ModelSpec, rng, dtype):
    return [Flatten(), Linear(spec.w, spec.hidden, rng, dtype=dtype), ReLU(),
            Linear(spec.hidden, spec.k, rng, he=False, dtype=dtype)]


def vgg_plan(n_weight_layers: int) -> list[list[int]]:
    """Conv channel groups for a VGG1D with two dense layers at the end.

    Convolutions come in pairs (a trailing single one if the count is odd);
    channels double per group starting at 64.
    """
    n_conv = n_weight_layers - 2
    groups, channels = [], VGG_BASE_CHANNELS
    while n_conv > 0:
        size = min(2, n_conv)
        groups.append([channels] * size)
        n_conv -= size
        channels *= 2
    return groups


def _vgg(spec: ModelSpec, rng, dtype):
    layers, c, length = [], 1, spec.w
    for group in vgg_plan(spec.vgg_layers):
        for filters in group:
            layers += [Conv1d(c, filters, 3, "same", rng, dtype), ReLU()]
            c = filters
        if length >= 2:
            layers.append(MaxPool1d(2))
            length //= 2
    layers += [Flatten(), Linear(c * length, VGG_HIDDEN, rng, dtype=dtype), ReLU(),
               Linear(VGG_HIDDEN, spec.k, rng, he=False, dtype=dtype)]
    return layers


_BUILDERS = {"FCN": _fcn, "FC2": _fc2, "VGG1D": _vgg}


def build_model(spec: ModelSpec, seed: int = 0, dtype=np.float32) -> Sequential:
    rng = np.random.Generator(np.random.PCG64(seed))
    model = Sequential(_BUILDERS[spec.family](spec, rng, dtype), name=spec.family)
    model.spec = spec
    return model


def fcn_param_count(k: int) -> int:
    """Parameter count of the FCN by summing its layer shapes (independent of build_model)."""
    total, c = 0, 1
    for filters, kernel in FCN_BLOCKS:
        total += c * kernel * filters + filters  # conv weights + bias
        total += 2 * filters                     # batch-norm gamma, beta
        c = filters
    return total + c * k + k


# -- training ------------------------------------------------------------------

def _make_optimizer(model: Sequential, config: TrainConfig):
    params = model.parameters()
    if config.optimizer == "SGD":
        return SGD(params, config.lr, config.momentum, config.weight_decay)
    return Adam(params, config.lr, weight_decay=config.weight_decay)


def predict_logits(model: Sequential, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    dtype = model.dtype
    out = []
    for start in range(0, len(x), batch_size):
        out.append(model.forward(np.asarray(x[start:start + batch_size], dtype=dtype), train=False))
    return np.concatenate(out) if out else np.zeros((0, 0))


def evaluate(model: Sequential, x: np.ndarray, y: np.ndarray, k: int | None = None) -> Evaluation:
    """Accuracy and confusion matrix; argmax ties go to the lowest class index."""
    y = np.asarray(y, dtype=np.int64)
    logits = predict_logits(model, x)
    k = k or logits.shape[1]
    pred = logits.argmax(axis=1)  # argmax returns the first maximum
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    accuracy = float(np.mean(pred == y)) if len(y) else float("nan")
    return Evaluation(accuracy, confusion, pred)


def train(model: Sequential, dataset: Dataset, config: TrainConfig,
          on_epoch=None) -> TrainReport:
    """Mini-batch training with per-epoch shuffling and plateau scheduling on train loss."""
    spec = getattr(model, "spec", None)
    in_width = dataset.train_x.shape[1] if dataset.train_x.ndim == 2 else None
    if spec is not None and (spec.w != dataset.w or spec.k != dataset.k):
        raise ValueError(f"model expects w={spec.w}, k={spec.k} but dataset has "
                         f"w={dataset.w}, k={dataset.k}")
    if in_width != dataset.w:
        raise ValueError(f"dataset chunks have width {in_width}, expected {dataset.w}")

    dtype = model.dtype
    x_train = dataset.train_x.astype(dtype)
    y_train = dataset.train_y
    x_test = dataset.test_x.astype(dtype)
    y_test = dataset.test_y

    optimizer = _make_optimizer(model, config)
    scheduler = PlateauScheduler(config.lr, config.patience, config.factor)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    report = TrainReport()
    report.initial_loss = softmax_cross_entropy(predict_logits(model, x_train), y_train)[0]
    t0 = time.perf_counter()
    n = len(x_train)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        loss_sum, correct, seen = 0.0, 0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            if len(idx) < 2:
                continue  # batch norm needs more than one example
            logits = model.forward(x_train[idx], train=True)
            loss, dlogits = softmax_cross_entropy(logits, y_train[idx])
            model.backward(dlogits.astype(dtype, copy=False))
            optimizer.step(model.gradients())
            loss_sum += loss * len(idx)
            correct += int(np.sum(logits.argmax(axis=1) == y_train[idx]))
            seen += len(idx)
        train_loss = loss_sum / seen
        if not math.isfinite(train_loss):
            raise FloatingPointError(f"training diverged at epoch {epoch}")
        test_acc = evaluate(model, x_test, y_test, dataset.k).accuracy
        record = EpochRecord(epoch, train_loss, correct / seen, test_acc, optimizer.lr)
        report.history.append(record)
        optimizer.lr = scheduler.step(train_loss)
        if test_acc > report.best_test_accuracy or report.best_state is None:
            report.best_test_accuracy, report.best_epoch = test_acc, epoch
            report.best_state = model.state()
        log.info("epoch %d loss %.5f train %.4f test %.4f lr %.3g", epoch, train_loss,
                 record.train_acc, test_acc, record.lr)
        if on_epoch is not None:
            on_epoch(record)
        if config.target_accuracy is not None and test_acc >= config.target_accuracy:
            break

    report.wall_time = time.perf_counter() - t0
    return report


def report_dict(report: TrainReport) -> dict:
    return {"history": [asdict(r) for r in report.history], "initial_loss": report.initial_loss,
            "best_epoch": report.best_epoch, "best_test_accuracy": report.best_test_accuracy}
