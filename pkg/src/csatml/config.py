"""YAML experiment configuration.

Top-level keys (all optional; defaults in brackets):

seed                      master seed for every derived RNG stream [0]
scenarios                 list of ScenarioConfig mappings, used by simulate/pipeline
  - ap_count              number of active APs, 0..2
    placements            list of {distance_ft, sight} (sight: LOS or NLOS), one per AP;
                          may be omitted for ap_count APs at 6 ft LOS
    duration              seconds of trace
    sample_rate           energy samples per second [192]
    seed                  trace seed [derived from master seed and list position]
    traffic               traffic model [FullBuffer]
    noise_floor_dbm       receiver indicator floor with no Wi-Fi present [-95]
dataset
  w                       chunk width in samples [512]
  max_chunks_per_class    cap on chunks per class after shuffling [null: no cap]
model
  family                  FCN, FC2 or VGG1D [FCN]
  vgg_layers              VGG1D weight layers, 4..7 [6]
  hidden                  FC2 hidden width [128]
train                     every TrainConfig field: optimizer (SGD|Adam), lr, momentum,
                          weight_decay, batch_size, epochs, patience, factor, seed,
                          target_accuracy
sweep
  widths                  chunk widths [1, 2, 4, ..., 2048 plus 384]
  k                       2 or 3 classes [3]
  duration                seconds of source trace per class [3600]
  max_chunks_per_class    [1000]
compare
  duration                seconds per scenario trace [600]
  w                       chunk width [512]
  max_chunks_per_class    [null]
  realtime_duration       seconds of fresh trace for the online replay [duration / 4]
  ac_file                 CSV with external AC results [null: AC rows left blank]
online
  initial                 confirmed AP count before the first chunk [1]
  duty                    AP count -> duty cycle [{0: 1.0, 1: 0.5, 2: 0.33}]
  queue_size              bound of the sample queue [4096]
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from . import sim
from .csat import DEFAULT_DUTY
from .experiments import DEFAULT_WIDTHS, derive_seed
from .models import ModelSpec, TrainConfig

_SECTIONS = {
    "dataset": {"w": 512, "max_chunks_per_class": None},
    "model": {"family": "FCN", "vgg_layers": 6, "hidden": 128},
    "sweep": {"widths": list(DEFAULT_WIDTHS), "k": 3, "duration": 3600.0,
              "max_chunks_per_class": 1000},
    "compare": {"duration": 600.0, "w": 512, "max_chunks_per_class": None,
                "realtime_duration": None, "ac_file": None},
    "online": {"initial": 1, "duty": dict(DEFAULT_DUTY), "queue_size": 4096},
}
_TOP = {"seed", "scenarios", "train", *_SECTIONS}
_SCENARIO_KEYS = {f.name for f in fields(sim.ScenarioConfig)}


@dataclass
class ExperimentConfig:
    seed: int = 0
    scenarios: list[sim.ScenarioConfig] = field(default_factory=list)
    train: TrainConfig = field(default_factory=TrainConfig)
    dataset: dict = field(default_factory=lambda: dict(_SECTIONS["dataset"]))
    model: dict = field(default_factory=lambda: dict(_SECTIONS["model"]))
    sweep: dict = field(default_factory=lambda: dict(_SECTIONS["sweep"]))
    compare: dict = field(default_factory=lambda: dict(_SECTIONS["compare"]))
    online: dict = field(default_factory=lambda: dict(_SECTIONS["online"]))

    def model_spec(self, w: int, k: int) -> ModelSpec:
        return ModelSpec(self.model["family"], w, k, int(self.model["vgg_layers"]),
                         int(self.model["hidden"]))


def _unknown(where: str, given, allowed) -> None:
    extra = sorted(set(given) - set(allowed))
    if extra:
        raise ValueError(f"{where}: unknown key(s) {extra}; allowed: {sorted(allowed)}")


def _scenario(raw: dict, index: int, master: int) -> sim.ScenarioConfig:
    where = f"scenarios[{index}]"
    if not isinstance(raw, dict):
        raise ValueError(f"{where}: expected a mapping")
    _unknown(where, raw, _SCENARIO_KEYS)
    kw = dict(raw)
    try:
        ap = int(kw.pop("ap_count"))
        duration = float(kw.pop("duration"))
    except KeyError as exc:
        raise ValueError(f"{where}: missing {exc.args[0]}") from None
    placements = kw.pop("placements", None)
    if placements is None:
        placements = [{"distance_ft": 6.0}] * ap
    try:
        placements = tuple(sim.Placement(**p) for p in placements)
    except TypeError as exc:
        raise ValueError(f"{where}: bad placement ({exc})") from None
    kw.setdefault("seed", derive_seed(master, 1000 + index))
    try:
        return sim.ScenarioConfig(ap, placements, duration, **kw)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{where}: {exc}") from None


def parse_config(raw: dict[str, Any] | None) -> ExperimentConfig:
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ValueError("config must be a mapping at the top level")
    _unknown("config", raw, _TOP)
    seed = int(raw.get("seed", 0))
    cfg = ExperimentConfig(seed=seed)
    cfg.scenarios = [_scenario(s, i, seed) for i, s in enumerate(raw.get("scenarios") or [])]
    train_raw = raw.get("train") or {}
    _unknown("train", train_raw, {f.name for f in fields(TrainConfig)})
    try:
        cfg.train = TrainConfig(**train_raw)
    except TypeError as exc:
        raise ValueError(f"train: {exc}") from None
    for name, defaults in _SECTIONS.items():
        section = raw.get(name) or {}
        _unknown(name, section, defaults)
        setattr(cfg, name, {**defaults, **section})
    cfg.online["duty"] = {int(k): float(v) for k, v in cfg.online["duty"].items()}
    cfg.model_spec(max(int(cfg.dataset["w"]), 1), 2)  # validates family / depth early
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ValueError(f"{path}: invalid YAML ({exc})") from None
    return parse_config(raw)
