"""Live telemetry and advice channel over WebSocket JSON, plus run control."""
from .app import create_app, handle_inbound
from .hub import ServiceHub
from .server import ServerHandle, ServerStartupError, serve

__all__ = [
    "create_app",
    "handle_inbound",
    "ServiceHub",
    "ServerHandle",
    "ServerStartupError",
    "serve",
]
