"""Online CSAT controller: streaming chunks, debounced AP count, duty cycle, latency."""

from __future__ import annotations

import json
import math
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

import numpy as np

from .detect import EdThresholds, ed_classify, ml_classify
from .dataprep import NormStats

DEFAULT_DUTY = {0: 1.00, 1: 0.50, 2: 0.33}


def duty_map(ap_count: int, mapping: dict[int, float] | None = None) -> float:
    mapping = DEFAULT_DUTY if mapping is None else mapping
    try:
        return mapping[ap_count]
    except KeyError:
        raise ValueError(f"no duty cycle configured for {ap_count} APs") from None


def detection_latency(w: int, sample_rate: float, inference_time: float,
                      overhead: float = 0.0) -> float:
    """Seconds from the first sample of a chunk to the classified result."""
    return w / sample_rate + inference_time + overhead


@dataclass
class CsatState:
    w: int
    sample_rate: float = 192.0
    confirmed: int = 1
    pending: int | None = None
    agree: int = 0
    duty_cycle: float = 0.5
    samples_seen: int = 0
    dropped: int = 0
    chunks: int = 0
    buffer: list = field(default_factory=list)
    duty: dict = field(default_factory=lambda: dict(DEFAULT_DUTY))

    def __post_init__(self):
        if self.w < 1:
            raise ValueError(f"chunk width must be >= 1, got {self.w}")
        self.duty_cycle = duty_map(self.confirmed, self.duty)

    @property
    def clock(self) -> float:
        return self.samples_seen / self.sample_rate


def ingest_sample(state: CsatState, sample: float) -> np.ndarray | None:
    """Buffer one dBm sample; returns a full chunk (and empties the buffer) every w samples."""
    try:
        value = float(sample)
    except (TypeError, ValueError):
        value = math.nan
    if not math.isfinite(value):
        state.dropped += 1
        return None
    state.buffer.append(value)
    state.samples_seen += 1
    if len(state.buffer) < state.w:
        return None
    chunk = np.array(state.buffer)
    state.buffer.clear()
    state.chunks += 1
    return chunk


def step_inference(state: CsatState, predicted: int) -> dict | None:
    """Two-vote debounce; returns a transition event when the confirmed count changes."""
    if predicted == state.confirmed:
        state.pending, state.agree = None, 0
        return None
    if predicted == state.pending:
        old = state.confirmed
        state.confirmed = predicted
        state.duty_cycle = duty_map(predicted, state.duty)
        state.pending, state.agree = None, 0
        return {"time_s": state.clock, "from": old, "to": predicted,
                "duty_cycle": state.duty_cycle}
    state.pending, state.agree = predicted, 1
    return None


# -- classifiers ------------------------------------------------------------------

class MLClassifier:
    """Trained network plus the normalization stats and class -> AP-count table of its dataset."""

    def __init__(self, model, stats: NormStats, classes):
        self.model, self.stats, self.classes = model, stats, tuple(classes)

    @property
    def w(self) -> int:
        return self.model.spec.w

    def __call__(self, chunk) -> int:
        return self.classes[ml_classify(self.model, chunk, self.stats).label]


class EDClassifier:
    def __init__(self, thresholds: EdThresholds, classes, w: int):
        self.thresholds, self.classes, self.w = thresholds, tuple(classes), w

    def __call__(self, chunk) -> int:
        return self.classes[ed_classify(chunk, self.thresholds)]


# -- online loop ----------------------------------------------------------------------

@dataclass
class LatencySummary:
    w: int
    sample_rate: float
    chunks: int
    dropped: int
    collection_s: float
    mean_inference_s: float
    max_inference_s: float
    mean_overhead_s: float
    total_s: float

    def as_dict(self) -> dict:
        return {"summary": {k: getattr(self, k) for k in self.__dataclass_fields__}}


_END = object()


def _producer(samples: Iterable, q: queue.Queue) -> None:
    try:
        for s in samples:
            q.put(s)  # blocks when full: back-pressure, never drops
    finally:
        q.put(_END)


def run_online(samples: Iterable, classifier: Callable[[np.ndarray], int], w: int,
               sample_rate: float = 192.0, initial: int = 1, duty: dict | None = None,
               queue_size: int = 4096) -> Iterator[dict]:
    """Consume samples through a bounded queue and yield one event per inference.

    Events carry ``time_s`` (sample clock), ``predicted_class``,
    ``confirmed_class`` and ``duty_cycle``; the last item is a latency summary.
    """
    state = CsatState(w, sample_rate, confirmed=initial, duty=dict(duty or DEFAULT_DUTY))
    q: queue.Queue = queue.Queue(maxsize=queue_size)
    reader = threading.Thread(target=_producer, args=(samples, q), daemon=True)
    reader.start()
    inference, overhead, collection = [], [], []
    chunk_start = 0
    while True:
        item = q.get()
        t_deq = time.perf_counter()
        if item is _END:
            break
        if not state.buffer:
            chunk_start = state.samples_seen
        chunk = ingest_sample(state, item)
        if chunk is None:
            continue
        collection.append((state.samples_seen - chunk_start) / sample_rate)
        t_ready = time.perf_counter()
        predicted = classifier(chunk)
        t_inf = time.perf_counter()
        transition = step_inference(state, predicted)
        event = {"time_s": round(state.clock, 6), "predicted_class": int(predicted),
                 "confirmed_class": state.confirmed, "duty_cycle": state.duty_cycle,
                 "transition": transition is not None}
        t_done = time.perf_counter()
        inference.append(t_inf - t_ready)
        overhead.append((t_ready - t_deq) + (t_done - t_inf))
        yield event
    reader.join()
    mean_inf = float(np.mean(inference)) if inference else 0.0
    mean_ovh = float(np.mean(overhead)) if overhead else 0.0
    mean_coll = float(np.mean(collection)) if collection else w / sample_rate
    yield LatencySummary(w, sample_rate, state.chunks, state.dropped, mean_coll, mean_inf,
                         float(np.max(inference)) if inference else 0.0, mean_ovh,
                         mean_coll + mean_inf + mean_ovh).as_dict()


def parse_samples(lines: Iterable[str]) -> Iterator[float]:
    """One dBm value per line; blank and '#' lines skipped, junk becomes NaN (dropped later)."""
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            yield float(line)
        except ValueError:
            yield math.nan


def events_to_jsonl(events: Iterable[dict]) -> Iterator[str]:
    for ev in events:
        yield json.dumps(ev, sort_keys=True)
