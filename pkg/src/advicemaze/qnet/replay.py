"""Uniform experience replay over fixed-capacity transition storage."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InsufficientReplay(Exception):
    pass


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray  # (C, H, W)
    action: int
    reward: float  # already divided by the reward scale
    next_obs: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Ring buffer; sampling is uniform with replacement."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, transition: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._cursor] = transition
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if not self._items:
            raise InsufficientReplay("replay buffer is empty")
        idx = rng.integers(0, len(self._items), size=batch_size)
        return [self._items[i] for i in idx]

    def sample_arrays(self, batch_size: int, rng: np.random.Generator):
        """Stacked (obs, actions, rewards, next_obs, terminals) arrays."""
        batch = self.sample(batch_size, rng)
        obs = np.stack([t.obs for t in batch])
        actions = np.array([t.action for t in batch], dtype=np.int64)
        rewards = np.array([t.reward for t in batch], dtype=np.float64)
        next_obs = np.stack([t.next_obs for t in batch])
        terminals = np.array([t.terminal for t in batch], dtype=np.float64)
        return obs, actions, rewards, next_obs, terminals
