"""Bellman-target training step, exploration schedule, per-action loss tracking."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import loss as loss_mod
from .adam import AdamState, adam_step
from .network import Params, QNetwork
from .replay import InsufficientReplay, ReplayBuffer


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 1e-4
    gamma: float = 0.95
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    replay_capacity: int = 10_000
    min_replay: int = 500
    target_sync_period: int = 500  # training steps between syncs; 0 disables the target net
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 20_000
    reward_scale: float = 1000.0
    loss_kind: str = loss_mod.SQUARED_LOG_ERROR

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be within [0, 1]")
        if self.learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")
        if self.eps_end > self.eps_start:
            raise ValueError("eps_end must not exceed eps_start")
        if self.loss_kind not in loss_mod.LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")


@dataclass
class LinearSchedule:
    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 20_000

    def value(self, step: int) -> float:
        if self.decay_steps <= 0:
            return self.end
        frac = min(max(step, 0) / self.decay_steps, 1.0)
        return self.start + (self.end - self.start) * frac


@dataclass
class ConfidenceTracker:
    """Exponential moving average of training loss per action.

    An action's average starts at its first observed sample loss; actions
    never sampled carry no estimate. ``max_loss`` is the largest single
    sample loss ever seen, so it never decreases and always dominates
    every per-action average.
    """

    decay: float = 0.99
    losses: dict[int, float] = field(default_factory=dict)
    max_loss: float = 0.0

    def update(self, action: int, sample_loss: float) -> None:
        if sample_loss < 0.0:
            raise ValueError("sample loss must be non-negative")
        prev = self.losses.get(action)
        if prev is None:
            self.losses[action] = sample_loss
        else:
            self.losses[action] = self.decay * prev + (1.0 - self.decay) * sample_loss
        self.max_loss = max(self.max_loss, sample_loss)

    def min_action_loss(self) -> float | None:
        if not self.losses:
            return None
        return min(self.losses.values())


def bellman_targets(
    rewards: np.ndarray,
    next_q: np.ndarray,
    terminals: np.ndarray,
    gamma: float,
) -> np.ndarray:
    """One-step targets: scaled reward + gamma * max_a' Q(s', a') when non-terminal."""
    return rewards + gamma * next_q.max(axis=1) * (1.0 - terminals)


class Trainer:
    """Owns the online/target parameters and applies batched updates."""

    def __init__(
        self,
        net: QNetwork,
        params: Params,
        bn_state: Params,
        cfg: TrainingConfig,
    ):
        self.net = net
        self.params = params
        self.bn_state = bn_state
        self.cfg = cfg
        self.adam = AdamState(params)
        self.updates = 0
        if cfg.target_sync_period > 0:
            self.target_params = {k: v.copy() for k, v in params.items()}
            self.target_bn = {k: v.copy() for k, v in bn_state.items()}
        else:
            self.target_params = params
            self.target_bn = bn_state

    def sync_target(self) -> None:
        if self.cfg.target_sync_period > 0:
            self.target_params = {k: v.copy() for k, v in self.params.items()}
            self.target_bn = {k: v.copy() for k, v in self.bn_state.items()}

    def train_step(
        self,
        buffer: ReplayBuffer,
        tracker: ConfidenceTracker,
        rng: np.random.Generator,
    ) -> float:
        """Sample a batch, regress taken-action values onto Bellman targets.

        Returns the reduced batch loss. Per-sample losses feed the tracker;
        only the taken action's output receives gradient.
        """
        cfg = self.cfg
        if len(buffer) < cfg.min_replay:
            raise InsufficientReplay(
                f"replay has {len(buffer)} transitions, need {cfg.min_replay}"
            )
        obs, actions, rewards, next_obs, terminals = buffer.sample_arrays(
            cfg.batch_size, rng
        )
        next_q = self.net.forward(self.target_params, self.target_bn, next_obs, training=False)
        targets = bellman_targets(rewards, next_q, terminals, cfg.gamma)

        q, cache = self.net.forward(self.params, self.bn_state, obs, training=True, want_cache=True)
        rows = np.arange(len(actions))
        pred = q[rows, actions]
        losses, grads = loss_mod.elementwise_loss(pred, targets, cfg.loss_kind)

        dq = np.zeros_like(q)
        dq[rows, actions] = grads / len(actions)  # objective: mean elementwise loss
        param_grads = self.net.backward(self.params, cache, dq)
        adam_step(
            self.params, param_grads, self.adam,
            lr=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps,
        )

        for action, sample_loss in zip(actions, losses):
            tracker.update(int(action), float(sample_loss))

        self.updates += 1
        if cfg.target_sync_period > 0 and self.updates % cfg.target_sync_period == 0:
            self.sync_target()
        return loss_mod.reduce_loss(losses, cfg.loss_kind)
