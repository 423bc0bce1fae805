"""Action selection: baseline epsilon-greedy, feedback arbitration, and
advice persistence with a friction budget.

Check order is exploration, then policy-confidence, then advice. The
confidence cost maps the ratio of the best per-action training loss to the
worst loss ever observed into (0, 1]; at or below the 0.25 threshold the
agent trusts its own policy and ignores pending advice.
"""
from __future__ import annotations

import math
import threading
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .qnet.training import ConfidenceTracker
from .world import Action, AgentPose, Heading

QFunction = Callable[[np.ndarray], np.ndarray]

COST_RATIO_FLOOR = 1e-12


@dataclass(frozen=True)
class AdviceEvent:
    direction: Heading
    issued_at: int  # global environment step when received
    source: str = "oracle"  # "oracle" | "human"


class PendingAdviceQueue:
    """FIFO advice buffer, safe for one producer and one consumer thread.

    Events expire ``ttl_steps`` after they were issued; overflowing the
    capacity drops the oldest entry.
    """

    def __init__(self, capacity: int = 5, ttl_steps: int = 20):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.ttl_steps = ttl_steps
        self._lock = threading.Lock()
        self._events: deque[AdviceEvent] = deque()
        self.total_pushed = 0

    def push(self, event: AdviceEvent) -> None:
        with self._lock:
            if len(self._events) == self.capacity:
                self._events.popleft()
            self._events.append(event)
            self.total_pushed += 1

    def _expire(self, now_step: int) -> None:
        while self._events and self._events[0].issued_at + self.ttl_steps < now_step:
            self._events.popleft()

    def pop(self, now_step: int) -> AdviceEvent | None:
        with self._lock:
            self._expire(now_step)
            return self._events.popleft() if self._events else None

    def pending(self, now_step: int) -> int:
        with self._lock:
            self._expire(now_step)
            return len(self._events)

    def clear(self) -> None:
        with self._lock:
            self._events.clear()


@dataclass(frozen=True)
class ArbitrationConfig:
    cost_threshold: float = 0.25
    friction: int = 2

    def __post_init__(self):
        if not 0.0 < self.cost_threshold < 1.0:
            raise ValueError("cost_threshold must be in (0, 1)")
        if self.friction < 0:
            raise ValueError("friction must be >= 0")


@dataclass
class ActiveAdvice:
    """A consumed advice being recited: direction plus remaining forward budget."""

    direction: Heading
    remaining_forward_steps: int


@dataclass(frozen=True)
class Decision:
    action: Action
    used_advice: bool = False  # action came from the advice machinery
    consumed_event: bool = False  # a queued event was dequeued this step


def relative_cost(min_loss: float, max_loss: float) -> float:
    """Confidence cost in (0, 1]: -1 / (ln sqrt(min/max) - 1).

    A max_loss of zero means no training signal yet, which is full cost 1.0.
    The ratio is clamped to [1e-12, 1] before evaluation.
    """
    if max_loss <= 0.0:
        return 1.0
    ratio = min(max(min_loss / max_loss, COST_RATIO_FLOOR), 1.0)
    return -1.0 / (0.5 * math.log(ratio) - 1.0)


def confidence_cost(tracker: ConfidenceTracker) -> float:
    min_loss = tracker.min_action_loss()
    if min_loss is None:
        return 1.0
    return relative_cost(min_loss, tracker.max_loss)


def cardinal_to_action(heading: Heading, direction: Heading) -> Action:
    """Single action that faces (or advances along) a cardinal direction."""
    delta = (int(direction) - int(heading)) % 4
    return (Action.FORWARD, Action.TURN_RIGHT, Action.TURN_AROUND, Action.TURN_LEFT)[delta]


def greedy_action(q_values: np.ndarray) -> Action:
    """Argmax with ties broken toward the lowest action index."""
    return Action(int(np.argmax(q_values)))


def choose_action_baseline(
    q_fn: QFunction, obs: np.ndarray, rng: np.random.Generator, epsilon: float
) -> Decision:
    if rng.random() < epsilon:
        return Decision(Action(int(rng.integers(4))))
    return Decision(greedy_action(q_fn(obs)))


def fa_choose_action(
    q_fn: QFunction,
    tracker: ConfidenceTracker,
    queue: PendingAdviceQueue,
    obs: np.ndarray,
    heading: Heading,
    rng: np.random.Generator,
    cfg: ArbitrationConfig,
    epsilon: float,
    step: int,
) -> Decision:
    if rng.random() < epsilon:
        return Decision(Action(int(rng.integers(4))))
    if confidence_cost(tracker) <= cfg.cost_threshold:
        return Decision(greedy_action(q_fn(obs)))
    event = queue.pop(step)
    if event is not None:
        return Decision(cardinal_to_action(heading, event.direction), True, True)
    return Decision(greedy_action(q_fn(obs)))


def naa_choose_action(
    q_fn: QFunction,
    tracker: ConfidenceTracker,
    queue: PendingAdviceQueue,
    active: ActiveAdvice | None,
    obs: np.ndarray,
    heading: Heading,
    rng: np.random.Generator,
    cfg: ArbitrationConfig,
    epsilon: float,
    step: int,
) -> tuple[Decision, ActiveAdvice | None]:
    """Advice-persisting variant; returns the decision and the new recital state.

    Consuming an event answers exactly like the plain arbitration agent and
    opens a friction window of that many forward steps. Orientation turns
    during recital are free; fresh advice preempts the window immediately.
    """
    if rng.random() < epsilon:
        return Decision(Action(int(rng.integers(4)))), active
    if confidence_cost(tracker) <= cfg.cost_threshold:
        return Decision(greedy_action(q_fn(obs))), active
    event = queue.pop(step)
    if event is not None:
        active = ActiveAdvice(event.direction, cfg.friction)
        return Decision(cardinal_to_action(heading, event.direction), True, True), active
    if active is not None and active.remaining_forward_steps > 0:
        if heading != active.direction:
            return Decision(cardinal_to_action(heading, active.direction), True), active
        active.remaining_forward_steps -= 1
        return Decision(Action.FORWARD, True), active
    return Decision(greedy_action(q_fn(obs))), active


class BaselineAgent:
    """Plain epsilon-greedy over the learned action values."""

    kind = "baseline"

    def __init__(self, q_fn: QFunction):
        self.q_fn = q_fn

    def choose(
        self, obs: np.ndarray, pose: AgentPose, step: int,
        rng: np.random.Generator, epsilon: float,
    ) -> Decision:
        return choose_action_baseline(self.q_fn, obs, rng, epsilon)


class FAAgent:
    """Arbitrates between exploring, exploiting, and queued advice."""

    kind = "fa"

    def __init__(
        self,
        q_fn: QFunction,
        tracker: ConfidenceTracker,
        queue: PendingAdviceQueue,
        cfg: ArbitrationConfig = ArbitrationConfig(),
    ):
        self.q_fn = q_fn
        self.tracker = tracker
        self.queue = queue
        self.cfg = cfg

    def choose(self, obs, pose, step, rng, epsilon) -> Decision:
        return fa_choose_action(
            self.q_fn, self.tracker, self.queue, obs, pose.heading,
            rng, self.cfg, epsilon, step,
        )


class NAAAgent(FAAgent):
    """Arbitration plus advice persistence across a friction window."""

    kind = "naa"

    def __init__(self, q_fn, tracker, queue, cfg: ArbitrationConfig = ArbitrationConfig()):
        super().__init__(q_fn, tracker, queue, cfg)
        self.active: ActiveAdvice | None = None

    def choose(self, obs, pose, step, rng, epsilon) -> Decision:
        decision, self.active = naa_choose_action(
            self.q_fn, self.tracker, self.queue, self.active, obs, pose.heading,
            rng, self.cfg, epsilon, step,
        )
        return decision
