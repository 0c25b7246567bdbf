"""Forward and backward kernels.

The public ``*_forward`` functions use the (batch, channels, length) layout.
Layers call the channels-last ``_cl`` variants, which keep every convolution
a single matrix product.
"""

from __future__ import annotations

import numpy as np


def same_padding(k: int) -> tuple[int, int]:
    """Zero padding that keeps the length; the extra zero goes on the right for even k."""
    return (k - 1) // 2, k // 2


def resolve_padding(padding, k: int) -> tuple[int, int]:
    if padding == "same":
        return same_padding(k)
    if padding == "valid":
        return 0, 0
    if isinstance(padding, int):
        return padding, padding
    left, right = padding
    return int(left), int(right)


# -- convolution -------------------------------------------------------------

def conv1d_cl(x, w2, k: int, pad: tuple[int, int]):
    """x: (s, L, c); w2: (k*c, f) -> y: (s, L_out, f), plus the im2col buffer."""
    s, length, c = x.shape
    left, right = pad
    if left or right:
        xp = np.zeros((s, length + left + right, c), dtype=x.dtype)
        xp[:, left:left + length] = x
    else:
        xp = x
    l_out = xp.shape[1] - k + 1
    if l_out < 1:
        raise ValueError(f"kernel of width {k} does not fit input of length {length} "
                         f"with padding {pad}")
    cols = np.empty((s, l_out, k, c), dtype=x.dtype)
    for tap in range(k):
        cols[:, :, tap, :] = xp[:, tap:tap + l_out, :]
    y = cols.reshape(s * l_out, k * c) @ w2
    return y.reshape(s, l_out, -1), cols


def conv1d_cl_backward(dy, cols, w2, k: int, pad: tuple[int, int], length: int):
    """Gradients w.r.t. input (s, L, c) and the (k*c, f) weight matrix."""
    s, l_out, f = dy.shape
    d2 = dy.reshape(s * l_out, f)
    dw2 = cols.reshape(s * l_out, -1).T @ d2
    dcols = (d2 @ w2.T).reshape(s, l_out, k, -1)
    c = dcols.shape[3]
    dxp = np.zeros((s, l_out + k - 1, c), dtype=dy.dtype)
    for tap in range(k):
        dxp[:, tap:tap + l_out] += dcols[:, :, tap, :]
    left = pad[0]
    return dxp[:, left:left + length], dw2


def filters_to_matrix(filters):
    """(f, c, k) filters -> (k*c, f) matrix matching the im2col column order."""
    f, c, k = filters.shape
    return filters.transpose(2, 1, 0).reshape(k * c, f)


def matrix_to_filters(w2, f: int, c: int, k: int):
    return w2.reshape(k, c, f).transpose(2, 1, 0)


def conv1d_forward(x, filters, bias, padding="valid"):
    """Cross-correlation y[b,j,t] = bias[j] + sum_i sum_tau x[b,i,t+tau-padL] * filters[j,i,tau]."""
    x = np.asarray(x)
    filters = np.asarray(filters)
    bias = np.asarray(bias)
    if x.ndim != 3 or filters.ndim != 3 or x.shape[1] != filters.shape[1]:
        raise ValueError(f"shape mismatch: input {x.shape} vs filters {filters.shape} "
                         "(expected (s, c, L) and (f, c, K))")
    if bias.shape != (filters.shape[0],):
        raise ValueError(f"shape mismatch: bias {bias.shape} vs filters {filters.shape}")
    k = filters.shape[2]
    pad = resolve_padding(padding, k)
    y, _ = conv1d_cl(np.ascontiguousarray(x.transpose(0, 2, 1)), filters_to_matrix(filters), k, pad)
    return (y + bias).transpose(0, 2, 1)


def conv1d_backward(dy, x, filters, padding="valid"):
    """Returns (dx, dfilters, dbias) for conv1d_forward, all in (s, c, L) layout."""
    x = np.asarray(x)
    f, c, k = filters.shape
    pad = resolve_padding(padding, k)
    w2 = filters_to_matrix(filters)
    _, cols = conv1d_cl(np.ascontiguousarray(x.transpose(0, 2, 1)), w2, k, pad)
    dy_cl = np.ascontiguousarray(np.asarray(dy).transpose(0, 2, 1))
    dx, dw2 = conv1d_cl_backward(dy_cl, cols, w2, k, pad, x.shape[2])
    return dx.transpose(0, 2, 1), matrix_to_filters(dw2, f, c, k), dy_cl.sum(axis=(0, 1))


# -- batch normalization -----------------------------------------------------

def batchnorm_cl(x, gamma, beta, eps, train, running_mean=None, running_var=None,
                 momentum=0.1):
    """Per-channel normalization over all but the last axis.

    In train mode the running statistics (if given) are updated in place.
    """
    axes = tuple(range(x.ndim - 1))
    if train:
        n = x.size // x.shape[-1]
        if n < 2:
            raise ValueError("batch norm in train mode needs at least 2 values per channel")
        mu = x.mean(axis=axes)
        xc = x - mu
        var = (xc * xc).mean(axis=axes)
        if running_mean is not None:
            running_mean *= 1 - momentum
            running_mean += momentum * mu
            running_var *= 1 - momentum
            running_var += momentum * var * (n / (n - 1))
    else:
        mu, var = running_mean, running_var
        xc = x - mu
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_std
    return gamma * xhat + beta, (xhat, inv_std)


def batchnorm_cl_backward(dy, cache, gamma):
    xhat, inv_std = cache
    axes = tuple(range(dy.ndim - 1))
    n = dy.size // dy.shape[-1]
    dbeta = dy.sum(axis=axes)
    dgamma = (dy * xhat).sum(axis=axes)
    dx = (gamma * inv_std / n) * (n * dy - dbeta - xhat * dgamma)
    return dx, dgamma, dbeta


def batchnorm_forward(x, gamma, beta, eps=1e-5, mode="train", running_mean=None,
                      running_var=None, momentum=0.1):
    """Batch norm of (s, f, L) input with per-channel statistics over (s, L)."""
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    x_cl = np.asarray(x).transpose(0, 2, 1)
    y, _ = batchnorm_cl(x_cl, gamma, beta, eps, mode == "train", running_mean, running_var,
                        momentum)
    return y.transpose(0, 2, 1)


def batchnorm_backward(dy, x, gamma, beta, eps=1e-5):
    """Train-mode gradients (dx, dgamma, dbeta), (s, f, L) layout."""
    x_cl = np.asarray(x).transpose(0, 2, 1)
    _, cache = batchnorm_cl(x_cl, gamma, beta, eps, True)
    dx, dg, db = batchnorm_cl_backward(np.asarray(dy).transpose(0, 2, 1), cache, gamma)
    return dx.transpose(0, 2, 1), dg, db


# -- elementwise, dense, pooling --------------------------------------------

def relu(x):
    return np.maximum(x, 0)


def relu_backward(dy, x):
    return dy * (x > 0)


def linear_forward(x, weight, bias):
    """y = x W^T + b for x (s, n), W (m, n)."""
    x = np.asarray(x)
    weight = np.asarray(weight)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ValueError(f"shape mismatch: input {x.shape} vs weight {weight.shape}")
    return x @ weight.T + bias


def linear_backward(dy, x, weight):
    return dy @ weight, dy.T @ x, dy.sum(axis=0)


def global_avg_pool(x):
    """Mean over the length axis of (s, f, L)."""
    return np.asarray(x).mean(axis=2)


def global_avg_pool_backward(dy, length: int):
    return np.repeat(dy[:, :, None] / length, length, axis=2)


def maxpool_cl(x, size=2):
    """Non-overlapping max pool along the length axis of (s, L, c); trailing samples dropped."""
    s, length, c = x.shape
    l_out = length // size
    win = x[:, :l_out * size].reshape(s, l_out, size, c)
    arg = win.argmax(axis=2)
    return np.take_along_axis(win, arg[:, :, None, :], axis=2)[:, :, 0, :], arg


def maxpool_cl_backward(dy, arg, length: int, size=2):
    s, l_out, c = dy.shape
    dwin = np.zeros((s, l_out, size, c), dtype=dy.dtype)
    np.put_along_axis(dwin, arg[:, :, None, :], dy[:, :, None, :], axis=2)
    dx = np.zeros((s, length, c), dtype=dy.dtype)
    dx[:, :l_out * size] = dwin.reshape(s, l_out * size, c)
    return dx


# -- loss ------------------------------------------------------------------------

def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean negative log-likelihood and its gradient (softmax - onehot) / s."""
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.int64)
    s, k = logits.shape
    if labels.shape != (s,):
        raise ValueError(f"expected {s} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(s)
    loss = float(np.mean(log_norm - z[rows, labels]))
    grad = np.exp(z - log_norm[:, None])
    grad[rows, labels] -= 1
    return loss, grad / s
