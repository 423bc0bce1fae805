"""Configurable convolutional Q-network: spec, parameters, forward, backward.

Stage order follows conv -> relu -> batch norm -> 2x2 max pool, repeated per
conv stage, then dense stages with relu, then a linear 4-way output head.
Action values are unbounded linear outputs; policies take the argmax.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import layers

Params = dict[str, np.ndarray]


class QNetError(Exception):
    pass


class ShapeMismatch(QNetError):
    pass


class DivergedActivation(QNetError):
    """Non-finite values appeared in the network output."""


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description.

    input_shape is (stacked frames, height, width). Four conv stages is the
    reference configuration; two suffice at desk scale.
    """

    input_shape: tuple[int, int, int] = (4, 32, 32)
    conv_channels: tuple[int, ...] = (16, 32, 32, 64)
    dense_widths: tuple[int, ...] = (128,)
    n_actions: int = 4

    def __post_init__(self):
        if self.n_actions != 4:
            raise ValueError("action space is fixed at 4")
        if not self.conv_channels:
            raise ValueError("at least one conv stage required")
        _, h, w = self.input_shape
        for i in range(len(self.conv_channels)):
            if h % 2 or w % 2:
                raise ValueError(
                    f"spatial dims must halve cleanly at stage {i}: {h}x{w}"
                )
            h, w = h // 2, w // 2

    @property
    def flat_features(self) -> int:
        _, h, w = self.input_shape
        shrink = 2 ** len(self.conv_channels)
        return self.conv_channels[-1] * (h // shrink) * (w // shrink)


class QNetwork:
    """Stateless forward/backward engine for one :class:`NetworkSpec`."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec

    def init_params(self, rng: np.random.Generator, dtype=np.float32) -> tuple[Params, Params]:
        """He-uniform weights, zero biases. Returns (params, bn_state)."""
        params: Params = {}
        bn_state: Params = {}
        c_in = self.spec.input_shape[0]
        for i, c_out in enumerate(self.spec.conv_channels):
            fan_in = c_in * 9
            limit = np.sqrt(6.0 / fan_in)
            params[f"conv{i}_w"] = rng.uniform(-limit, limit, (c_out, c_in, 3, 3)).astype(dtype)
            params[f"conv{i}_b"] = np.zeros(c_out, dtype=dtype)
            params[f"bn{i}_gamma"] = np.ones(c_out, dtype=dtype)
            params[f"bn{i}_beta"] = np.zeros(c_out, dtype=dtype)
            bn_state[f"bn{i}_mean"] = np.zeros(c_out, dtype=dtype)
            bn_state[f"bn{i}_var"] = np.ones(c_out, dtype=dtype)
            c_in = c_out
        width_in = self.spec.flat_features
        for j, width in enumerate(self.spec.dense_widths):
            limit = np.sqrt(6.0 / width_in)
            params[f"dense{j}_w"] = rng.uniform(-limit, limit, (width, width_in)).astype(dtype)
            params[f"dense{j}_b"] = np.zeros(width, dtype=dtype)
            width_in = width
        limit = np.sqrt(6.0 / width_in)
        params["out_w"] = rng.uniform(-limit, limit, (self.spec.n_actions, width_in)).astype(dtype)
        params["out_b"] = np.zeros(self.spec.n_actions, dtype=dtype)
        return params, bn_state

    def _check_input(self, x: np.ndarray) -> None:
        if x.ndim != 4 or tuple(x.shape[1:]) != self.spec.input_shape:
            raise ShapeMismatch(
                f"expected (B, {', '.join(map(str, self.spec.input_shape))}), got {x.shape}"
            )

    def forward(
        self,
        params: Params,
        bn_state: Params,
        x: np.ndarray,
        training: bool = False,
        want_cache: bool = False,
    ):
        """Batched forward pass to (B, 4) action values.

        Training mode normalizes with batch statistics (updating the running
        estimates); inference mode uses the running statistics, making the
        pass deterministic for fixed parameters.
        """
        self._check_input(x)
        caches = []
        out = x
        for i in range(len(self.spec.conv_channels)):
            out, c_conv = layers.conv3x3_forward(out, params[f"conv{i}_w"], params[f"conv{i}_b"])
            out, c_relu = layers.relu_forward(out)
            out, c_bn = layers.batchnorm_forward(
                out,
                params[f"bn{i}_gamma"],
                params[f"bn{i}_beta"],
                bn_state[f"bn{i}_mean"],
                bn_state[f"bn{i}_var"],
                training=training,
            )
            out, c_pool = layers.maxpool2x2_forward(out)
            caches.append((c_conv, c_relu, c_bn, c_pool))
        batch = out.shape[0]
        flat = out.reshape(batch, -1)
        dense_caches = []
        for j in range(len(self.spec.dense_widths)):
            flat, c_dense = layers.dense_forward(flat, params[f"dense{j}_w"], params[f"dense{j}_b"])
            flat, c_relu = layers.relu_forward(flat)
            dense_caches.append((c_dense, c_relu))
        q, c_out = layers.dense_forward(flat, params["out_w"], params["out_b"])
        if not np.isfinite(q).all():
            raise DivergedActivation("non-finite action values")
        if want_cache:
            return q, (caches, dense_caches, c_out, out.shape)
        return q

    def backward(self, params: Params, cache, dq: np.ndarray) -> Params:
        """Gradients of a scalar objective given d(objective)/d(q-values)."""
        caches, dense_caches, c_out, conv_out_shape = cache
        grads: Params = {}
        dflat, grads["out_w"], grads["out_b"] = layers.dense_backward(dq, params["out_w"], c_out)
        for j in reversed(range(len(self.spec.dense_widths))):
            c_dense, c_relu = dense_caches[j]
            dflat = layers.relu_backward(dflat, c_relu)
            dflat, grads[f"dense{j}_w"], grads[f"dense{j}_b"] = layers.dense_backward(
                dflat, params[f"dense{j}_w"], c_dense
            )
        dout = dflat.reshape(conv_out_shape)
        for i in reversed(range(len(self.spec.conv_channels))):
            c_conv, c_relu, c_bn, c_pool = caches[i]
            dout = layers.maxpool2x2_backward(dout, c_pool)
            dout, grads[f"bn{i}_gamma"], grads[f"bn{i}_beta"] = layers.batchnorm_backward(dout, c_bn)
            dout = layers.relu_backward(dout, c_relu)
            dout, grads[f"conv{i}_w"], grads[f"conv{i}_b"] = layers.conv3x3_backward(
                dout, params[f"conv{i}_w"], c_conv, need_dx=i > 0
            )
        return grads

    def q_values(self, params: Params, bn_state: Params, obs: np.ndarray) -> np.ndarray:
        """Inference-mode action values for a single (C, H, W) observation."""
        return self.forward(params, bn_state, obs[None], training=False)[0]


def param_count(params: Params) -> int:
    return sum(int(p.size) for p in params.values())


def clone_params(params: Params) -> Params:
    return {k: v.copy() for k, v in params.items()}
