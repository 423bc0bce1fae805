"""Server-side state shared across endpoints: maps, the live channel, runs."""
from __future__ import annotations

import threading

from ..agents import PendingAdviceQueue
from ..telemetry import TelemetryChannel
from ..world import GridMap
from .models import RunRequest, RunStatus


class ServiceHub:
    """Owns the telemetry channel and the (single) background run, if any."""

    def __init__(self, channel: TelemetryChannel | None = None):
        self.channel = channel or TelemetryChannel(PendingAdviceQueue())
        self.state_rate = 10.0  # outbound state messages per second, at most
        self._maps: dict[str, GridMap] = {}
        self._lock = threading.Lock()
        self._clients = 0
        self._teacher: int | None = None  # id of the full-duplex client
        self._next_client = 1
        self._run_status: RunStatus | None = None
        self._run_thread: threading.Thread | None = None

    # -- maps --------------------------------------------------------------

    def register_map(self, gmap: GridMap) -> str:
        digest = gmap.digest
        self._maps[digest] = gmap
        return digest

    def map_by_digest(self, digest: str) -> GridMap | None:
        return self._maps.get(digest)

    # -- client bookkeeping --------------------------------------------------

    def attach_client(self) -> tuple[int, bool]:
        """Register a websocket client; returns (client id, is_teacher)."""
        with self._lock:
            client_id = self._next_client
            self._next_client += 1
            self._clients += 1
            if self._teacher is None:
                self._teacher = client_id
            self.channel.set_client_connected(True)
            return client_id, self._teacher == client_id

    def detach_client(self, client_id: int) -> None:
        with self._lock:
            self._clients -= 1
            if self._teacher == client_id:
                self._teacher = None
            if self._clients == 0:
                self.channel.set_client_connected(False)

    @property
    def client_count(self) -> int:
        return self._clients

    # -- control -------------------------------------------------------------

    def inject_pause_resume(self, cmd: str) -> bool:
        """Apply a pause/resume command; unknown commands raise ValueError."""
        if cmd == "pause":
            return self.channel.pause()
        if cmd == "resume":
            return self.channel.resume()
        raise ValueError(f"unknown command {cmd!r}")

    # -- background runs -------------------------------------------------------

    def run_status(self) -> RunStatus | None:
        status = self._run_status
        if status is not None and status.state == "running":
            latest = self.channel.latest()
            if latest is not None:
                status = status.model_copy(
                    update={"episode": latest.episode, "step": latest.step}
                )
        return status

    def start_run(self, request: RunRequest, target) -> RunStatus:
        """Launch ``target(request, status)`` on a worker thread; one at a time."""
        with self._lock:
            if self._run_status is not None and self._run_status.state == "running":
                raise RuntimeError("a run is already active")
            run_id = (self._run_status.run_id + 1) if self._run_status else 1
            status = RunStatus(run_id=run_id, state="running", request=request)
            self._run_status = status

        def worker():
            try:
                summary = target(request)
                self._run_status = status.model_copy(
                    update={"state": "finished", "summary": summary}
                )
            except Exception as exc:  # surfaced through GET /runs
                self._run_status = status.model_copy(
                    update={"state": "failed", "error": str(exc)}
                )

        self._run_thread = threading.Thread(target=worker, daemon=True)
        self._run_thread.start()
        return status

    def wait_run(self, timeout: float | None = None) -> None:
        if self._run_thread is not None:
            self._run_thread.join(timeout)
