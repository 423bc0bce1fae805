"""Numerical verification of backprop against central finite differences.

Central differences are only meaningful where the network is differentiable:
a perturbation that flips a relu mask or a pooling argmax straddles a kink,
so those parameter elements are excluded from the comparison rather than
polluting it with stencil artifacts.
"""
from __future__ import annotations

import numpy as np

from . import loss as loss_mod
from .layers import dense_forward
from .network import NetworkSpec, QNetwork

SMALL_SPEC = NetworkSpec(input_shape=(2, 8, 8), conv_channels=(3, 4), dense_widths=(8,))


def _relative_error(backprop: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-relative disagreement between two gradient tensors."""
    diff = float(np.linalg.norm(backprop - numeric))
    scale = max(float(np.linalg.norm(backprop)), float(np.linalg.norm(numeric)), 1e-12)
    return diff / scale


def _kink_signature(cache, pred: np.ndarray, shift: float) -> bytes:
    """Byte fingerprint of every piecewise-linear branch taken in a pass."""
    conv_caches, dense_caches, _, _ = cache
    parts = []
    for _, c_relu, _, c_pool in conv_caches:
        parts.append(c_relu.tobytes())
        pooled_in, pooled_out = c_pool
        for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)):
            parts.append((pooled_in[:, :, i::2, j::2] == pooled_out).tobytes())
    for _, c_relu in dense_caches:
        parts.append(c_relu.tobytes())
    parts.append((pred > -shift).tobytes())
    return b"".join(parts)


def gradient_check(
    spec: NetworkSpec = SMALL_SPEC,
    rng: np.random.Generator | None = None,
    batch_size: int = 4,
    perturbation: float = 1e-3,
    loss_kind: str = loss_mod.SQUARED_LOG_ERROR,
) -> float:
    """Max per-tensor relative error of backprop vs central differences.

    Runs the real training objective (mean per-element loss on taken-action
    outputs, batch-statistics normalization) in double precision on random
    parameters, inputs, and targets.
    """
    rng = rng or np.random.default_rng(0)
    net = QNetwork(spec)
    params, bn_state = net.init_params(rng, dtype=np.float64)
    for key, value in params.items():
        if key.endswith("_gamma"):
            params[key] = rng.uniform(0.7, 1.3, value.shape)
        else:
            params[key] = rng.uniform(-0.4, 0.4, value.shape)
    x = rng.uniform(-1.0, 1.0, (batch_size, *spec.input_shape))
    actions = rng.integers(0, spec.n_actions, batch_size)
    targets = rng.uniform(0.2, 2.0, batch_size)
    rows = np.arange(batch_size)
    shift = 1.0

    def evaluate() -> tuple[float, bytes]:
        q, cache = net.forward(params, bn_state, x, training=True, want_cache=True)
        pred = q[rows, actions]
        losses, _ = loss_mod.elementwise_loss(pred, targets, loss_kind, shift=shift)
        return float(np.mean(losses)), _kink_signature(cache, pred, shift)

    q, cache = net.forward(params, bn_state, x, training=True, want_cache=True)
    pred = q[rows, actions]
    losses, dpred = loss_mod.elementwise_loss(pred, targets, loss_kind, shift=shift)
    base_signature = _kink_signature(cache, pred, shift)
    dq = np.zeros_like(q)
    dq[rows, actions] = dpred / batch_size
    analytic = net.backward(params, cache, dq)

    worst = 0.0
    for key, tensor in params.items():
        flat = tensor.ravel()
        numeric = np.empty_like(flat)
        valid = np.ones(flat.size, dtype=bool)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + perturbation
            up, sig_up = evaluate()
            flat[i] = orig - perturbation
            down, sig_down = evaluate()
            flat[i] = orig
            if sig_up != base_signature or sig_down != base_signature:
                valid[i] = False
                numeric[i] = 0.0
            else:
                numeric[i] = (up - down) / (2.0 * perturbation)
        if valid.any():
            worst = max(
                worst, _relative_error(analytic[key].ravel()[valid], numeric[valid])
            )
    return worst


def gradient_check_linear(
    rng: np.random.Generator | None = None,
    perturbation: float = 1e-3,
) -> float:
    """Same check on a bare linear map with a locally quadratic loss."""
    rng = rng or np.random.default_rng(0)
    w = rng.uniform(-0.5, 0.5, (4, 6))
    b = rng.uniform(-0.5, 0.5, 4)
    x = rng.uniform(-1.0, 1.0, (5, 6))
    actions = rng.integers(0, 4, 5)
    rows = np.arange(5)
    base_pred, _ = dense_forward(x, w, b)
    targets = base_pred[rows, actions] + rng.uniform(-0.3, 0.3, 5)

    def objective() -> float:
        pred, _ = dense_forward(x, w, b)
        losses, _ = loss_mod.elementwise_loss(pred[rows, actions], targets, loss_mod.HUBER)
        return float(np.mean(losses))

    pred, cache_x = dense_forward(x, w, b)
    _, dpred = loss_mod.elementwise_loss(pred[rows, actions], targets, loss_mod.HUBER)
    dout = np.zeros_like(pred)
    dout[rows, actions] = dpred / len(actions)
    dw = dout.T @ cache_x
    db = dout.sum(axis=0)

    worst = 0.0
    for tensor, analytic in ((w, dw), (b, db)):
        flat = tensor.ravel()
        numeric = np.empty_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + perturbation
            up = objective()
            flat[i] = orig - perturbation
            down = objective()
            flat[i] = orig
            numeric[i] = (up - down) / (2.0 * perturbation)
        worst = max(worst, _relative_error(analytic.ravel(), numeric))
    return worst
