"""FastAPI application: telemetry websocket, map/state REST, run control."""
from __future__ import annotations

import asyncio
import json
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from pydantic import ValidationError

from ..agents import AdviceEvent
from ..harness import ExperimentConfig, desk_scale_config, run_experiment
from ..world import Heading, load_map_file
from .hub import ServiceHub
from .models import (
    CARDINALS,
    ErrorMessage,
    MapResponse,
    PoseModel,
    RunRequest,
    RunStatus,
    StatusResponse,
)


def handle_inbound(hub: ServiceHub, raw: str, is_teacher: bool) -> ErrorMessage | None:
    """Apply one inbound websocket message; returns an error reply or None."""
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError:
        return ErrorMessage(reason="bad json")
    if not isinstance(payload, dict):
        return ErrorMessage(reason="bad json")
    kind = payload.get("type")
    if kind == "advice":
        direction = payload.get("direction")
        if direction not in CARDINALS:
            return ErrorMessage(reason="bad direction")
        if not is_teacher:
            return ErrorMessage(reason="observer connection")
        hub.channel.queue.push(
            AdviceEvent(
                direction=Heading[direction.upper()],
                issued_at=hub.channel.global_step,
                source="human",
            )
        )
        return None
    if kind == "control":
        cmd = payload.get("cmd")
        if cmd not in ("pause", "resume"):
            return ErrorMessage(reason="bad command")
        if not is_teacher:
            return ErrorMessage(reason="observer connection")
        hub.inject_pause_resume(cmd)
        return None
    return ErrorMessage(reason="unknown message type")


def _run_from_request(hub: ServiceHub, request: RunRequest) -> dict:
    if request.preset == "desk":
        cfg = desk_scale_config(
            request.agent,
            request.condition,
            episodes=request.episodes,
            sessions=request.sessions,
            base_seed=request.seed,
            friction=request.friction,
            out_dir=request.out_dir,
        )
    else:
        cfg = ExperimentConfig(
            agent=request.agent,
            condition=request.condition,
            episodes=request.episodes,
            sessions=request.sessions,
            base_seed=request.seed,
            friction=request.friction,
            out_dir=request.out_dir,
        )
    hub.register_map(load_map_file(cfg.resolved_map_path))
    result = run_experiment(cfg, channel=hub.channel)
    return result.summary


def create_app(hub: ServiceHub | None = None, static_dir: str | None = None) -> FastAPI:
    hub = hub or ServiceHub()
    app = FastAPI(title="advicemaze", version="0.1.0")
    app.state.hub = hub

    @app.get("/health")
    def health() -> dict:
        return {"ok": True}

    @app.get("/status", response_model=StatusResponse)
    def status() -> StatusResponse:
        return StatusResponse(
            paused=hub.channel.paused,
            clients=hub.client_count,
            run=hub.run_status(),
        )

    @app.get("/map/{digest}", response_model=MapResponse)
    def map_by_digest(digest: str) -> MapResponse:
        gmap = hub.map_by_digest(digest)
        if gmap is None:
            raise HTTPException(status_code=404, detail="unknown map digest")
        return MapResponse(
            digest=digest,
            width=gmap.width,
            height=gmap.height,
            rows=gmap.rows(),
            spawn=PoseModel(
                x=gmap.spawn.x, y=gmap.spawn.y, heading=gmap.spawn.heading.name.lower()
            ),
            goal=gmap.goal,
            milestone_entry=gmap.milestone_entry.threshold,
            milestone_exit=gmap.milestone_exit.threshold,
            milestone_axis=gmap.milestone_entry.axis,  # type: ignore[arg-type]
        )

    @app.post("/control")
    def control(payload: dict) -> dict:
        cmd = payload.get("cmd")
        try:
            acknowledged = hub.inject_pause_resume(cmd)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"acknowledged": acknowledged, "paused": hub.channel.paused}

    @app.post("/runs", response_model=RunStatus)
    def start_run(request: RunRequest) -> RunStatus:
        try:
            return hub.start_run(request, lambda req: _run_from_request(hub, req))
        except RuntimeError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc

    @app.get("/runs", response_model=RunStatus)
    def get_run() -> RunStatus:
        status = hub.run_status()
        if status is None:
            raise HTTPException(status_code=404, detail="no run started")
        return status

    @app.websocket("/ws")
    async def websocket_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        client_id, is_teacher = hub.attach_client()
        send_lock = asyncio.Lock()

        async def sender() -> None:
            last_sent = (-1, -1)
            interval = 1.0 / hub.state_rate
            while True:
                snap = hub.channel.latest()
                if snap is not None and (snap.episode, snap.step) > last_sent:
                    async with send_lock:
                        await ws.send_text(json.dumps(snap.to_message()))
                    last_sent = (snap.episode, snap.step)
                await asyncio.sleep(interval)

        sender_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await ws.receive_text()
                reply = handle_inbound(hub, raw, is_teacher)
                if reply is not None:
                    async with send_lock:
                        await ws.send_text(reply.model_dump_json())
        except WebSocketDisconnect:
            pass
        finally:
            sender_task.cancel()
            hub.detach_client(client_id)

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app
