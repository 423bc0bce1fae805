"""Training losses: squared-log-error (reported as its root mean) and Huber.

The log loss operates on shifted values 1 + shift + max(x, -shift) so both
sides stay positive; rewards are pre-scaled by the reward divisor before
they ever reach this module, keeping targets within the safe range.
"""
from __future__ import annotations

import numpy as np

SQUARED_LOG_ERROR = "squared_log_error"
HUBER = "huber"
LOSS_KINDS = (SQUARED_LOG_ERROR, HUBER)


class NonFiniteLoss(Exception):
    pass


def elementwise_loss(
    pred: np.ndarray, target: np.ndarray, kind: str = SQUARED_LOG_ERROR,
    shift: float = 1.0, delta: float = 1.0,
):
    """Per-element loss and d(loss)/d(pred) for matching-shaped arrays."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if not (np.isfinite(pred).all() and np.isfinite(target).all()):
        raise NonFiniteLoss("non-finite prediction or target")
    if kind == SQUARED_LOG_ERROR:
        a = 1.0 + shift + np.maximum(pred, -shift)
        b = 1.0 + shift + np.maximum(target, -shift)
        diff = np.log(a) - np.log(b)
        losses = diff * diff
        grads = np.where(pred > -shift, 2.0 * diff / a, 0.0)
    elif kind == HUBER:
        err = pred - target
        small = np.abs(err) <= delta
        losses = np.where(small, 0.5 * err * err, delta * (np.abs(err) - 0.5 * delta))
        grads = np.where(small, err, delta * np.sign(err))
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return losses, grads


def reduce_loss(losses: np.ndarray, kind: str = SQUARED_LOG_ERROR) -> float:
    """Batch reduction: root of the mean for the log loss, mean for Huber."""
    mean = float(np.mean(losses))
    return float(np.sqrt(mean)) if kind == SQUARED_LOG_ERROR else mean
