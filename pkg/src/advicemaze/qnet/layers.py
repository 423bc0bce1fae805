"""Numpy building blocks with explicit forward/backward passes.

Array layout is (batch, channels, height, width) throughout. Each forward
returns (output, cache); the matching backward consumes the cache and the
upstream gradient and returns gradients for inputs and parameters.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BN_EPS = 1e-5


def _im2col3x3(x: np.ndarray) -> np.ndarray:
    """(B, C, H, W) -> (B*H*W, C*9) patch matrix with same-padding."""
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    # windows: (B, C, H, W, 3, 3)
    windows = sliding_window_view(xp, (3, 3), axis=(2, 3))
    return np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(
        b * h * w, c * 9
    )


def conv3x3_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """3x3 convolution, stride 1, same padding. w is (F, C, 3, 3)."""
    bsz, c, h, wd = x.shape
    f = w.shape[0]
    cols = _im2col3x3(x)
    out = cols @ w.reshape(f, c * 9).T
    out += b
    out = out.reshape(bsz, h, wd, f).transpose(0, 3, 1, 2)
    return out, (x.shape, cols)


def conv3x3_backward(dout: np.ndarray, w: np.ndarray, cache, need_dx: bool = True):
    """``need_dx=False`` skips the input gradient (wasted on the first layer)."""
    x_shape, cols = cache
    bsz, c, h, wd = x_shape
    f = w.shape[0]
    dflat = np.ascontiguousarray(dout.transpose(0, 2, 3, 1)).reshape(bsz * h * wd, f)
    dw = (dflat.T @ cols).reshape(f, c, 3, 3)
    db = dflat.sum(axis=0)
    if not need_dx:
        return None, dw, db
    # Channel-major scatter keeps every accumulation read contiguous.
    dcols = w.reshape(f, c * 9).T @ dflat.T  # (C*9, B*H*W)
    dcols = dcols.reshape(c, 3, 3, bsz, h, wd)
    dxp = np.zeros((c, bsz, h + 2, wd + 2), dtype=dout.dtype)
    for i in range(3):
        for j in range(3):
            dxp[:, :, i : i + h, j : j + wd] += dcols[:, i, j]
    return np.ascontiguousarray(dxp[:, :, 1 : h + 1, 1 : wd + 1].transpose(1, 0, 2, 3)), dw, db


def relu_forward(x: np.ndarray):
    out = np.maximum(x, 0.0)
    return out, x > 0.0


def relu_backward(dout: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dout * mask


def batchnorm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.99,
):
    """Per-channel batch normalization over (B, H, W).

    Training uses batch statistics (sum and sum-of-squares in one fused pass
    each) and updates the running estimates in place; inference uses the
    running estimates only.
    """
    n = x.shape[0] * x.shape[2] * x.shape[3]
    if training:
        mean = x.sum(axis=(0, 2, 3)) / n
        sumsq = np.einsum("bchw,bchw->c", x, x, optimize=True)
        var = np.maximum(sumsq / n - mean * mean, 0.0)
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    scale = (gamma * inv_std).astype(x.dtype, copy=False)
    shift = (beta - mean * scale).astype(x.dtype, copy=False)
    out = x * scale[None, :, None, None]
    out += shift[None, :, None, None]
    xhat = None
    if training:
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    return out, (xhat, inv_std, gamma)


def batchnorm_backward(dout: np.ndarray, cache):
    xhat, inv_std, gamma = cache
    if xhat is None:
        raise ValueError("batchnorm backward requires a training-mode forward")
    n = dout.shape[0] * dout.shape[2] * dout.shape[3]
    dgamma = np.einsum("bchw,bchw->c", dout, xhat, optimize=True)
    dbeta = dout.sum(axis=(0, 2, 3))
    dxhat = dout * gamma[None, :, None, None]
    s1 = dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
    s2 = np.einsum("bchw,bchw->c", dxhat, xhat, optimize=True)[None, :, None, None]
    dx = (inv_std[None, :, None, None] / n) * (n * dxhat - s1 - xhat * s2)
    return dx, dgamma, dbeta


def maxpool2x2_forward(x: np.ndarray):
    """2x2 max pooling, stride 2. Ties route to the first window element
    in (0,0), (0,1), (1,0), (1,1) order."""
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2x2 needs even spatial dims, got {h}x{w}")
    w00 = x[:, :, 0::2, 0::2]
    w01 = x[:, :, 0::2, 1::2]
    w10 = x[:, :, 1::2, 0::2]
    w11 = x[:, :, 1::2, 1::2]
    out = np.maximum(np.maximum(w00, w01), np.maximum(w10, w11))
    return out, (x, out)


def maxpool2x2_backward(dout: np.ndarray, cache) -> np.ndarray:
    x, out = cache
    dx = np.zeros_like(x)
    remaining = dout
    for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)):
        window = x[:, :, i::2, j::2]
        hit = window == out
        dx[:, :, i::2, j::2] = np.where(hit, remaining, 0.0)
        remaining = np.where(hit, 0.0, remaining)
    return dx


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x is (B, in), w is (out, in)."""
    return x @ w.T + b, x


def dense_backward(dout: np.ndarray, w: np.ndarray, x: np.ndarray):
    dw = dout.T @ x
    db = dout.sum(axis=0)
    dx = dout @ w
    return dx, dw, db
