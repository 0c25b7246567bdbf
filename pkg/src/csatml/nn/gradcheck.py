"""Central finite differences for checking analytic gradients."""

from __future__ import annotations

import numpy as np


def numerical_grad(f, theta: np.ndarray, h: float = 1e-5, order: int = 2) -> np.ndarray:
    """Central-difference gradient of scalar ``f()`` w.r.t. ``theta``, perturbed in place.

    ``order=4`` uses the five-point stencil; its smaller truncation error allows a
    larger ``h``, which keeps round-off well below tiny gradient entries.
    """
    if order not in (2, 4):
        raise ValueError(f"order must be 2 or 4, got {order}")
    grad = np.zeros_like(theta, dtype=np.float64)
    flat = theta.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]

        def at(delta):
            flat[i] = orig + delta
            return f()

        if order == 2:
            g = (at(h) - at(-h)) / (2 * h)
        else:
            g = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h)
        flat[i] = orig
        grad.flat[i] = g
    return grad


def max_rel_error(analytic, numeric, floor: float = 1e-6, abs_floor: float = 1e-8) -> float:
    """max |a - n| / max(|a|, |n|, floor * scale, abs_floor).

    ``scale`` is the largest magnitude in either array; ``abs_floor`` keeps
    exactly-zero gradients (round-off on both sides) from reading as 100% error.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.shape != n.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {n.shape}")
    if a.size == 0:
        return 0.0
    scale = max(np.abs(a).max(), np.abs(n).max(), 1e-12)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), max(floor * scale, abs_floor))
    return float((np.abs(a - n) / denom).max())
