"""Width sweep, ED/AC/ML comparison and the end-to-end pipeline."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import sim
from .csat import MLClassifier, run_online
from .dataprep import Dataset, build_dataset, chunk_stride, denormalize, read_dataset, write_dataset
from .detect import (EdThresholds, calibrate_ed_thresholds, detection_metrics, ed_classify_batch,
                     ml_classify_batch)
from .models import ModelSpec, TrainConfig, TrainReport, build_model, evaluate, train
from .nn.checkpoint import load_checkpoint, save_checkpoint

log = logging.getLogger(__name__)

DEFAULT_WIDTHS = (1, 2, 4, 8, 16, 32, 64, 128, 256, 384, 512, 1024, 2048)
MAX_WIDTH = 2048
METHODS = ("ED", "AC-external", "ML_t", "ML_r")
CASES = {
    # case -> placements of the APs that are ON (both on the same side of the BS)
    "A": (6.0, 15.0),
    "B": (6.0,),
    "C": (15.0,),
}


def derive_seed(master: int, *keys: int) -> int:
    """Independent 64-bit seed for a (master seed, key...) pair."""
    ss = np.random.SeedSequence([master, *keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.6f}"


# -- width sweep --------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    w: int
    k: int
    test_accuracy: float
    epochs: int
    n_train: int
    n_test: int


def sweep_traces(k: int, duration: float, seed: int) -> list[sim.EnergyTrace]:
    """Source traces for the sweep: one per class, single placement (6 ft, LOS).

    With k=3 (0, 1 or 2 APs) the receiver's indicator floor sits inside the
    Wi-Fi power range, as observed in the measured data.
    """
    if k == 3:
        counts, floor = (0, 1, 2), sim.INDICATOR_FLOOR_DBM
    elif k == 2:
        counts, floor = (1, 2), sim.NOISE_FLOOR_DBM
    else:
        raise ValueError(f"sweep supports k=2 or k=3, got {k}")
    return [sim.simulate_trace(sim.ScenarioConfig.standard(
        ap, duration, seed=derive_seed(seed, 100 + ap), noise_floor_dbm=floor)) for ap in counts]


def validate_widths(widths: Sequence[int]) -> list[int]:
    out = []
    for w in widths:
        w = int(w)
        if not 1 <= w <= MAX_WIDTH:
            raise ValueError(f"sweep width {w} outside [1, {MAX_WIDTH}]")
        chunk_stride(w)
        out.append(w)
    return out


def run_sweep(widths: Sequence[int], traces: Sequence[sim.EnergyTrace], k: int,
              config: TrainConfig, max_chunks_per_class: int | None = None,
              seed: int = 0) -> list[SweepRow]:
    """Train a fresh FCN per width on chunks of the same source traces."""
    widths = validate_widths(widths)
    shortest = min(len(t) for t in traces)
    if shortest < max(widths):
        raise ValueError(f"shortest trace has {shortest} samples, fewer than the largest "
                         f"width {max(widths)}")
    rows = []
    for w in widths:
        w_seed = derive_seed(seed, w)
        ds = build_dataset(traces, w, k, seed=w_seed, max_chunks_per_class=max_chunks_per_class)
        model = build_model(ModelSpec("FCN", w, k), seed=w_seed)
        report = train(model, ds, replace(config, seed=w_seed))
        rows.append(SweepRow(w, k, report.final_test_accuracy, len(report.history),
                             len(ds.train_y), len(ds.test_y)))
        log.info("sweep w=%d k=%d test accuracy %.4f", w, k, rows[-1].test_accuracy)
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["w", "k", "test_accuracy", "epochs", "n_train", "n_test"])
    for r in rows:
        writer.writerow([r.w, r.k, _fmt(r.test_accuracy), r.epochs, r.n_train, r.n_test])
    return buf.getvalue()


# -- ED / AC / ML comparison ------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRow:
    method: str
    scenario: str
    sight: str
    accuracy: float
    p_d: float
    p_fa: float


def comparison_scenarios(duration: float, seed: int) -> list[tuple[str, str, sim.ScenarioConfig]]:
    out = []
    for si, sight in enumerate(sim.SIGHTS):
        for ci, (case, distances) in enumerate(CASES.items()):
            placements = tuple(sim.Placement(d, sight) for d in distances)
            cfg = sim.ScenarioConfig(len(placements), placements, duration,
                                     seed=derive_seed(seed, 200 + 10 * si + ci))
            out.append((case, sight, cfg))
    return out


def read_ac_results(path) -> dict[tuple[str, str], ComparisonRow]:
    """External AC results: CSV with scenario, sight, accuracy and optional P_D, P_FA columns."""
    rows = {}
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.DictReader(fh), start=2):
            try:
                key = (rec["scenario"].strip(), rec["sight"].strip())
                vals = [float(rec[c]) if rec.get(c, "").strip() else float("nan")
                        for c in ("accuracy", "P_D", "P_FA")]
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad AC row ({exc})") from None
            rows[key] = ComparisonRow("AC-external", *key, *vals)
    return rows


def _group_metrics(pred_by_scn, true_by_scn, idx_group, i):
    """Detection rate on scenario i, false alarms on the other-class scenarios of its group."""
    target = true_by_scn[i]
    idx_group = [i] + [j for j in idx_group if true_by_scn[j] != target]
    preds = np.concatenate([pred_by_scn[j] for j in idx_group])
    labels = np.concatenate([np.full(len(pred_by_scn[j]), true_by_scn[j]) for j in idx_group])
    group_rep = detection_metrics(preds, labels, target)
    return balanced_accuracy(group_rep.p_d, group_rep.p_fa), group_rep.p_d, group_rep.p_fa


def balanced_accuracy(p_d: float, p_fa: float) -> float:
    """Accuracy of a binary test with both classes weighted equally (0.5 = chance)."""
    return (p_d + 1.0 - p_fa) / 2.0


def run_comparison(duration: float, w: int, config: TrainConfig, seed: int = 0,
                   max_chunks_per_class: int | None = None, ac_results: dict | None = None,
                   realtime_duration: float | None = None):
    """Table-III style comparison over Cases A/B/C x LOS/NLOS.

    One FCN is trained on all six scenarios (classes: 1 vs 2 APs).  ED cut
    points are calibrated per scenario on the raw training chunks.
    ML_t scores the test half; ML_r replays fresh traces through the online
    pipeline with non-overlapping chunks.
    """
    scenarios = comparison_scenarios(duration, seed)
    traces = [sim.simulate_trace(cfg) for _, _, cfg in scenarios]
    ds = build_dataset(traces, w, 2, seed=derive_seed(seed, 1),
                       max_chunks_per_class=max_chunks_per_class)
    model = build_model(ModelSpec("FCN", w, 2), seed=derive_seed(seed, 2))
    report = train(model, ds, replace(config, seed=derive_seed(seed, 3)))
    cls_of = {ap: i for i, ap in enumerate(ds.classes)}
    true = [cls_of[cfg.ap_count] for _, _, cfg in scenarios]

    def raw(src, off, i):
        mask = src == i
        return np.stack([traces[i].values[o:o + w] for o in off[mask]]) if mask.any() \
            else np.zeros((0, w))

    # ML on the test half
    ml_pred = [model_predict(model, ds.test_x[ds.test_src == i]) for i in range(len(scenarios))]

    # ED: each scenario gets cut points calibrated on its own training chunks against
    # the other-class scenarios of the same sight, with both classes weighted equally
    thresholds: dict[tuple[str, str], EdThresholds] = {}
    ed_rows = {}
    for i, (case, sight, _) in enumerate(scenarios):
        rivals = [j for j, s in enumerate(scenarios) if s[1] == sight and true[j] != true[i]]
        members = [i] + rivals
        x = np.concatenate([raw(ds.train_src, ds.train_off, j) for j in members])
        y = np.concatenate([np.full(np.sum(ds.train_src == j), true[j]) for j in members])
        cuts = thresholds[(case, sight)] = calibrate_ed_thresholds(x, y, 2, balanced=True)
        own = ed_classify_batch(raw(ds.test_src, ds.test_off, i), cuts)
        other = np.concatenate([ed_classify_batch(raw(ds.test_src, ds.test_off, j), cuts)
                                for j in rivals])
        p_d, p_fa = float(np.mean(own == true[i])), float(np.mean(other == true[i]))
        ed_rows[i] = (balanced_accuracy(p_d, p_fa), p_d, p_fa)

    # ML on fresh traces through the online path
    rt_duration = realtime_duration or duration / 4
    clf = MLClassifier(model, ds.stats, ds.classes)
    mlr_pred = []
    for i, (_, _, cfg) in enumerate(scenarios):
        fresh = sim.simulate_trace(replace(cfg, duration=rt_duration,
                                           seed=derive_seed(seed, 300 + i)))
        events = [e for e in run_online(fresh.values, clf, w, cfg.sample_rate)
                  if "summary" not in e]
        mlr_pred.append(np.array([cls_of[e["predicted_class"]] for e in events], dtype=np.int64))

    rows = []
    for method in METHODS:
        for i, (case, sight, _) in enumerate(scenarios):
            group = [j for j, s in enumerate(scenarios) if s[1] == sight]
            if method == "AC-external":
                ext = (ac_results or {}).get((case, sight))
                rows.append(ext or ComparisonRow(method, case, sight, float("nan"),
                                                 float("nan"), float("nan")))
                continue
            if method == "ED":
                acc, p_d, p_fa = ed_rows[i]
            else:
                preds = {"ML_t": ml_pred, "ML_r": mlr_pred}[method]
                acc, p_d, p_fa = _group_metrics(preds, true, group, i)
            rows.append(ComparisonRow(method, case, sight, acc, p_d, p_fa))
    return rows, report, thresholds


def model_predict(model, x) -> np.ndarray:
    if len(x) == 0:
        return np.zeros(0, dtype=np.int64)
    return evaluate(model, x, np.zeros(len(x), dtype=np.int64)).predictions


def comparison_csv(rows: Sequence[ComparisonRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "scenario", "sight", "accuracy", "P_D", "P_FA"])
    for r in rows:
        writer.writerow([r.method, r.scenario, r.sight, _fmt(r.accuracy), _fmt(r.p_d),
                         _fmt(r.p_fa)])
    return buf.getvalue()


# -- evaluation report ------------------------------------------------------------------

def eval_rows(model, dataset: Dataset) -> list[list]:
    """ML and ED metrics per class on the test half of a stored dataset.

    ED works on dBm chunks recovered by undoing the normalization.
    """
    ev = evaluate(model, dataset.test_x, dataset.test_y, dataset.k)
    train_raw = denormalize(dataset.train_x, dataset.stats)
    test_raw = denormalize(dataset.test_x, dataset.stats)
    cuts = calibrate_ed_thresholds(train_raw, dataset.train_y, dataset.k)
    ed_pred = ed_classify_batch(test_raw, cuts)
    rows = []
    for method, pred in (("ML", ev.predictions), ("ED", ed_pred)):
        for c in range(dataset.k):
            rep = detection_metrics(pred, dataset.test_y, c)
            rows.append([method, dataset.classes[c], _fmt(rep.accuracy), _fmt(rep.p_d),
                         _fmt(rep.p_fa), rep.tp, rep.fn, rep.fp, rep.tn])
    return rows


def eval_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "ap_count", "accuracy", "P_D", "P_FA", "TP", "FN", "FP", "TN"])
    writer.writerows(rows)
    return buf.getvalue()


# -- checkpoints with dataset context ---------------------------------------------------

def save_model(path, model, dataset: Dataset, config: TrainConfig | None = None,
               optimizer_state=None) -> None:
    spec = model.spec
    meta = {"spec": {"family": spec.family, "w": spec.w, "k": spec.k,
                     "vgg_layers": spec.vgg_layers, "hidden": spec.hidden},
            "stats": {"mu": dataset.stats.mu, "sigma": dataset.stats.sigma},
            "classes": list(dataset.classes)}
    if config is not None:
        meta["train"] = {k: getattr(config, k) for k in config.__dataclass_fields__}
    save_checkpoint(path, model, meta, optimizer_state)


def load_model(path):
    """Returns (model, NormStats, classes)."""
    from .dataprep import NormStats
    model, meta, _ = load_checkpoint(path)
    model.spec = ModelSpec(**meta["spec"])
    return model, NormStats(**meta["stats"]), tuple(meta["classes"])


# -- full pipeline ----------------------------------------------------------------------

def run_pipeline(workdir, scenarios: Sequence[sim.ScenarioConfig], w: int,
                 config: TrainConfig, family: str = "FCN", seed: int = 0,
                 max_chunks_per_class: int | None = None) -> dict[str, Path]:
    """simulate -> prepare -> train -> eval, writing every artifact under ``workdir``."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    out: dict[str, Path] = {}
    traces = []
    for i, cfg in enumerate(scenarios):
        path = workdir / f"trace_{i}_ap{cfg.ap_count}.csv"
        sim.write_trace(sim.simulate_trace(cfg), path)
        traces.append(sim.read_trace(path))
        out[f"trace_{i}"] = path
    k = len({t.label for t in traces})
    ds = build_dataset(traces, w, k, seed=seed, max_chunks_per_class=max_chunks_per_class)
    prefix = workdir / "dataset"
    write_dataset(ds, prefix)
    ds = read_dataset(prefix)
    model = build_model(ModelSpec(family, w, k), seed=seed)
    report = train(model, ds, config)
    (workdir / "train_report.csv").write_text(report.to_csv())
    save_model(workdir / "model.ckpt", model, ds, config)
    model, _, _ = load_model(workdir / "model.ckpt")
    (workdir / "eval_report.csv").write_text(eval_csv(eval_rows(model, ds)))
    out.update(dataset=prefix, train_report=workdir / "train_report.csv",
               model=workdir / "model.ckpt", eval_report=workdir / "eval_report.csv")
    return out
