"""Shared state between a running training loop and the advice server.

The loop publishes latest-wins state snapshots and honors a pause gate; the
server thread injects advice through the queue. Nothing here blocks the
training loop: publishing is a lock-guarded reference swap.
"""
from __future__ import annotations

import base64
import threading
from dataclasses import dataclass, field
from typing import Any

from .agents import PendingAdviceQueue


@dataclass
class StateSnapshot:
    episode: int
    step: int
    x: int
    y: int
    heading: str
    score: float
    last_action: str
    advice_active: bool
    frame_w: int
    frame_h: int
    frame_bytes: bytes
    map_digest: str

    def to_message(self) -> dict[str, Any]:
        return {
            "type": "state",
            "episode": self.episode,
            "step": self.step,
            "pose": {"x": self.x, "y": self.y, "heading": self.heading},
            "score": self.score,
            "lastAction": self.last_action,
            "adviceActive": self.advice_active,
            "frame": {
                "w": self.frame_w,
                "h": self.frame_h,
                "b64": base64.b64encode(self.frame_bytes).decode("ascii"),
            },
            "mapDigest": self.map_digest,
        }


class TelemetryChannel:
    """Latest-wins snapshot mailbox plus a pause gate and the advice queue."""

    def __init__(self, queue: PendingAdviceQueue):
        self.queue = queue
        self._lock = threading.Lock()
        self._latest: StateSnapshot | None = None
        self._run_gate = threading.Event()
        self._run_gate.set()
        self._has_client = False
        self.global_step = 0  # loop keeps this current for advice stamping

    # -- loop side -------------------------------------------------------

    def publish(self, snapshot: StateSnapshot) -> None:
        if not self._has_client:
            return
        with self._lock:
            self._latest = snapshot

    def wait_if_paused(self, timeout: float | None = None) -> None:
        self._run_gate.wait(timeout)

    # -- server side -----------------------------------------------------

    def latest(self) -> StateSnapshot | None:
        with self._lock:
            return self._latest

    def set_client_connected(self, connected: bool) -> None:
        self._has_client = connected

    @property
    def client_connected(self) -> bool:
        return self._has_client

    @property
    def paused(self) -> bool:
        return not self._run_gate.is_set()

    def pause(self) -> bool:
        self._run_gate.clear()
        return True

    def resume(self) -> bool:
        self._run_gate.set()
        return True
