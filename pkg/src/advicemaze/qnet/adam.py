"""Adam optimizer with bias correction, over named parameter dictionaries."""
from __future__ import annotations

import numpy as np

Params = dict[str, np.ndarray]


class AdamState:
    """First/second moment estimates plus the shared step counter."""

    def __init__(self, params: Params):
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}


def adam_step(
    params: Params,
    grads: Params,
    state: AdamState,
    lr: float = 1e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Params:
    """One in-place Adam update; returns the updated parameter dict."""
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for key, grad in grads.items():
        m = state.m[key]
        v = state.v[key]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        m_hat = m / bc1
        v_hat = v / bc2
        params[key] -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(params[key].dtype)
    return params
