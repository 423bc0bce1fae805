"""Threaded uvicorn runner so the server can sit beside a training loop."""
from __future__ import annotations

import threading
import time

import uvicorn
from fastapi import FastAPI

from .app import create_app
from .hub import ServiceHub


class ServerStartupError(Exception):
    pass


class ServerHandle:
    """A uvicorn server running on a daemon thread."""

    def __init__(self, app: FastAPI, host: str, port: int):
        self._config = uvicorn.Config(app, host=host, port=port, log_level="warning")
        self._server = uvicorn.Server(self._config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def start(self, timeout: float = 10.0) -> "ServerHandle":
        self._thread.start()
        deadline = time.monotonic() + timeout
        while not self._server.started:
            if not self._thread.is_alive():
                raise ServerStartupError("server thread exited during startup")
            if time.monotonic() > deadline:
                raise ServerStartupError("server did not start in time")
            time.sleep(0.01)
        return self

    @property
    def port(self) -> int:
        for srv in self._server.servers:
            for sock in srv.sockets:
                return sock.getsockname()[1]
        raise RuntimeError("server has no bound sockets")

    def stop(self, timeout: float = 5.0) -> None:
        self._server.should_exit = True
        self._thread.join(timeout)


def serve(
    port: int,
    hub: ServiceHub | None = None,
    host: str = "127.0.0.1",
    static_dir: str | None = None,
) -> tuple[ServerHandle, ServiceHub]:
    """Start the service on ``port`` (0 picks a free one); returns handle + hub.

    The hub's queue is the live advice queue: wire it into an agent loop by
    passing ``hub.channel`` to the session runner.
    """
    hub = hub or ServiceHub()
    app = create_app(hub, static_dir=static_dir)
    handle = ServerHandle(app, host, port).start()
    return handle, hub
