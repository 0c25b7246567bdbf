"""Layers with explicit forward/backward and a sequential container.

Activations flow channels-last, (batch, length, channels); parameters keep
the conventional layouts (conv filters (f, c, k), dense weights (m, n)).
"""

from __future__ import annotations

import math

import numpy as np

from . import functional as F


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x, train: bool):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def config(self) -> dict:
        return {}

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        """Per-example output shape for a per-example input shape."""
        return shape


def _he_uniform(rng, shape, fan_in, dtype):
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv1d(Layer):
    kind = "conv1d"

    def __init__(self, in_channels, out_channels, kernel_size, padding="same", rng=None,
                 dtype=np.float32):
        super().__init__()
        self.in_channels, self.out_channels, self.kernel_size = in_channels, out_channels, kernel_size
        self.padding = padding
        self.pad = F.resolve_padding(padding, kernel_size)
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * kernel_size
        self.params["weight"] = _he_uniform(rng, (out_channels, in_channels, kernel_size), fan_in, dtype)
        self.params["bias"] = np.zeros(out_channels, dtype=dtype)

    def forward(self, x, train):
        w2 = F.filters_to_matrix(self.params["weight"])
        y, cols = F.conv1d_cl(x, w2, self.kernel_size, self.pad)
        y += self.params["bias"]
        self._cache = (cols, w2, x.shape[1])
        return y

    def backward(self, dy):
        cols, w2, length = self._cache
        dx, dw2 = F.conv1d_cl_backward(dy, cols, w2, self.kernel_size, self.pad, length)
        self.grads["weight"] = F.matrix_to_filters(dw2, self.out_channels, self.in_channels,
                                                   self.kernel_size)
        self.grads["bias"] = dy.sum(axis=(0, 1))
        self._cache = None
        return dx

    def config(self):
        return {"in_channels": self.in_channels, "out_channels": self.out_channels,
                "kernel_size": self.kernel_size, "padding": self.padding}

    def output_shape(self, shape):
        length, _ = shape
        left, right = self.pad
        return (length + left + right - self.kernel_size + 1, self.out_channels)


class BatchNorm1d(Layer):
    kind = "batchnorm"

    def __init__(self, channels, eps=1e-5, momentum=0.1, dtype=np.float32):
        super().__init__()
        self.channels, self.eps, self.momentum = channels, eps, momentum
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_mean"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_var"] = np.ones(channels, dtype=dtype)

    def forward(self, x, train):
        y, cache = F.batchnorm_cl(x, self.params["gamma"], self.params["beta"], self.eps, train,
                                  self.buffers["running_mean"], self.buffers["running_var"],
                                  self.momentum)
        self._cache = cache
        return y

    def backward(self, dy):
        dx, dg, db = F.batchnorm_cl_backward(dy, self._cache, self.params["gamma"])
        self.grads["gamma"], self.grads["beta"] = dg, db
        self._cache = None
        return dx

    def config(self):
        return {"channels": self.channels, "eps": self.eps, "momentum": self.momentum}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, train):
        self._cache = x
        return F.relu(x)

    def backward(self, dy):
        dx = F.relu_backward(dy, self._cache)
        self._cache = None
        return dx


class MaxPool1d(Layer):
    kind = "maxpool"

    def __init__(self, size=2):
        super().__init__()
        self.size = size

    def forward(self, x, train):
        y, arg = F.maxpool_cl(x, self.size)
        self._cache = (arg, x.shape[1])
        return y

    def backward(self, dy):
        arg, length = self._cache
        self._cache = None
        return F.maxpool_cl_backward(dy, arg, length, self.size)

    def config(self):
        return {"size": self.size}

    def output_shape(self, shape):
        length, c = shape
        return (length // self.size, c)


class GlobalAvgPool(Layer):
    kind = "gap"

    def forward(self, x, train):
        self._cache = x.shape[1]
        return x.mean(axis=1)

    def backward(self, dy):
        length = self._cache
        return np.repeat(dy[:, None, :] / length, length, axis=1)

    def output_shape(self, shape):
        return (shape[-1],)


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x, train):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._cache)

    def output_shape(self, shape):
        return (int(np.prod(shape)),)


class Linear(Layer):
    """Dense layer; ``he=False`` uses the plain U(+-1/sqrt(fan_in)) init for output layers."""

    kind = "linear"

    def __init__(self, in_features, out_features, rng=None, he=True, dtype=np.float32):
        super().__init__()
        self.in_features, self.out_features, self.he = in_features, out_features, he
        rng = rng or np.random.default_rng(0)
        if he:
            w = _he_uniform(rng, (out_features, in_features), in_features, dtype)
        else:
            bound = 1.0 / math.sqrt(in_features)
            w = rng.uniform(-bound, bound, size=(out_features, in_features)).astype(dtype)
        self.params["weight"] = w
        self.params["bias"] = np.zeros(out_features, dtype=dtype)

    def forward(self, x, train):
        self._cache = x
        return x @ self.params["weight"].T + self.params["bias"]

    def backward(self, dy):
        x = self._cache
        self._cache = None
        self.grads["weight"] = dy.T @ x
        self.grads["bias"] = dy.sum(axis=0)
        return dy @ self.params["weight"]

    def config(self):
        return {"in_features": self.in_features, "out_features": self.out_features, "he": self.he}

    def output_shape(self, shape):
        return (self.out_features,)


LAYER_TYPES = {cls.kind: cls for cls in
               (Conv1d, BatchNorm1d, ReLU, MaxPool1d, GlobalAvgPool, Flatten, Linear)}


class Sequential:
    """Ordered stack of layers taking (batch, width) chunks and returning logits."""

    def __init__(self, layers, name="model"):
        self.layers = list(layers)
        self.name = name

    def forward(self, x, train=False):
        x = np.asarray(x)
        if x.ndim == 2:
            x = x[:, :, None]
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    __call__ = forward

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def named_params(self):
        for i, layer in enumerate(self.layers):
            for key, value in layer.params.items():
                yield f"{i}.{layer.kind}.{key}", layer, key, value

    def named_buffers(self):
        for i, layer in enumerate(self.layers):
            for key, value in layer.buffers.items():
                yield f"{i}.{layer.kind}.{key}", layer, key, value

    def parameters(self) -> list[np.ndarray]:
        return [v for _, _, _, v in self.named_params()]

    def gradients(self) -> list[np.ndarray]:
        return [layer.grads[key] for _, layer, key, _ in self.named_params()]

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    @property
    def dtype(self):
        params = self.parameters()
        return params[0].dtype if params else np.float64

    def astype(self, dtype):
        for _, layer, key, value in self.named_params():
            layer.params[key] = value.astype(dtype)
        for _, layer, key, value in self.named_buffers():
            layer.buffers[key] = value.astype(dtype)
        return self

    def state(self) -> dict[str, np.ndarray]:
        out = {name: v.copy() for name, _, _, v in self.named_params()}
        out.update({name: v.copy() for name, _, _, v in self.named_buffers()})
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, layer, key, value in self.named_params():
            if state[name].shape != value.shape:
                raise ValueError(f"{name}: shape {state[name].shape} != {value.shape}")
            layer.params[key] = np.array(state[name], dtype=value.dtype)
        for name, layer, key, value in self.named_buffers():
            layer.buffers[key] = np.array(state[name], dtype=value.dtype)

    def architecture(self) -> list[dict]:
        return [{"kind": layer.kind, **layer.config()} for layer in self.layers]

    def shape_walk(self, width: int) -> list[tuple[str, tuple[int, ...]]]:
        """Per-example output shape after every layer for a (width, 1) input."""
        shape: tuple[int, ...] = (width, 1)
        out = []
        for layer in self.layers:
            shape = layer.output_shape(shape)
            out.append((layer.kind, shape))
        return out


def from_architecture(arch: list[dict], dtype=np.float32) -> Sequential:
    """Rebuild a model skeleton (parameters then come from load_state)."""
    layers = []
    for entry in arch:
        entry = dict(entry)
        kind = entry.pop("kind")
        cls = LAYER_TYPES[kind]
        if kind in ("conv1d", "linear", "batchnorm"):
            entry["dtype"] = dtype
        layers.append(cls(**entry))
    return Sequential(layers)


def backward(model: Sequential, x, labels):
    """Train-mode loss and gradients of every parameter for one batch."""
    logits = model.forward(x, train=True)
    loss, dlogits = F.softmax_cross_entropy(logits, labels)
    model.backward(dlogits.astype(logits.dtype, copy=False))
    return loss, {name: layer.grads[key] for name, layer, key, _ in model.named_params()}
