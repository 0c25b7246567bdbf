"""SGD with momentum and weight decay, Adam, and reduce-on-plateau scheduling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def sgd_step(params, grads, velocity, lr, momentum=0.9, weight_decay=0.0):
    """In-place update: g' = g + wd*theta; v = m*v + g'; theta -= lr*v."""
    for p, g, v in zip(params, grads, velocity):
        g = g + weight_decay * p if weight_decay else g
        v *= momentum
        v += g
        p -= lr * v
    return params


def adam_step(params, grads, state: dict, lr, beta1=0.9, beta2=0.999, eps=1e-8,
              weight_decay=0.0):
    """In-place bias-corrected Adam update; ``state`` holds t, m and v."""
    state["t"] = state.get("t", 0) + 1
    t = state["t"]
    if "m" not in state:
        state["m"] = [np.zeros_like(p) for p in params]
        state["v"] = [np.zeros_like(p) for p in params]
    c1 = 1 - beta1 ** t
    c2 = 1 - beta2 ** t
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        if weight_decay:
            g = g + weight_decay * p
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params


class SGD:
    def __init__(self, params, lr=1e-4, momentum=0.9, weight_decay=1e-4):
        self.params = params
        self.lr, self.momentum, self.weight_decay = lr, momentum, weight_decay
        self.velocity = [np.zeros_like(p) for p in params]

    def step(self, grads):
        sgd_step(self.params, grads, self.velocity, self.lr, self.momentum, self.weight_decay)

    def state_dict(self):
        return {"kind": "sgd", "lr": self.lr, "velocity": [v.copy() for v in self.velocity]}

    def load_state_dict(self, state):
        self.lr = state["lr"]
        for v, saved in zip(self.velocity, state["velocity"]):
            v[...] = saved


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.weight_decay = weight_decay
        self.state = {"t": 0, "m": [np.zeros_like(p) for p in params],
                      "v": [np.zeros_like(p) for p in params]}

    def step(self, grads):
        adam_step(self.params, grads, self.state, self.lr, self.beta1, self.beta2, self.eps,
                  self.weight_decay)

    def state_dict(self):
        return {"kind": "adam", "lr": self.lr, "t": self.state["t"],
                "m": [m.copy() for m in self.state["m"]],
                "v": [v.copy() for v in self.state["v"]]}

    def load_state_dict(self, state):
        self.lr = state["lr"]
        self.state["t"] = int(state["t"])
        for dst, src in zip(self.state["m"] + self.state["v"], list(state["m"]) + list(state["v"])):
            dst[...] = src


@dataclass
class PlateauScheduler:
    """Halve the learning rate after ``patience`` evaluations without improvement.

    Lower is better.  The counter resets on improvement and on every reduction.
    """

    lr: float
    patience: int = 50
    factor: float = 0.5
    best: float = field(default=float("inf"))
    bad_evals: int = 0

    def step(self, metric: float) -> float:
        if metric < self.best:
            self.best = metric
            self.bad_evals = 0
        else:
            self.bad_evals += 1
            if self.bad_evals >= self.patience:
                self.lr *= self.factor
                self.bad_evals = 0
        return self.lr


def plateau_scheduler_step(history, lr, patience=50, factor=0.5) -> float:
    """Learning rate after replaying ``history`` of the monitored metric from ``lr``."""
    sched = PlateauScheduler(lr, patience, factor)
    for metric in history:
        sched.step(metric)
    return sched.lr
