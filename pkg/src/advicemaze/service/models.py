"""Pydantic models for the wire protocol and REST surface."""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

CARDINALS = ("north", "south", "east", "west")


class PoseModel(BaseModel):
    x: int
    y: int
    heading: Literal["north", "east", "south", "west"]


class FrameModel(BaseModel):
    w: int
    h: int
    b64: str


class StateMessage(BaseModel):
    type: Literal["state"] = "state"
    episode: int
    step: int
    pose: PoseModel
    score: float
    lastAction: Literal["forward", "turn_left", "turn_right", "turn_around"]
    adviceActive: bool
    frame: FrameModel
    mapDigest: str


class AdviceMessage(BaseModel):
    type: Literal["advice"] = "advice"
    direction: str


class ControlMessage(BaseModel):
    type: Literal["control"] = "control"
    cmd: str


class ErrorMessage(BaseModel):
    type: Literal["error"] = "error"
    reason: str


class MapResponse(BaseModel):
    digest: str
    width: int
    height: int
    rows: list[str]
    spawn: PoseModel
    goal: tuple[int, int]
    milestone_entry: int
    milestone_exit: int
    milestone_axis: Literal["x", "y"]


class StatusResponse(BaseModel):
    paused: bool
    clients: int
    run: "RunStatus | None" = None


class RunRequest(BaseModel):
    agent: Literal["baseline", "fa", "naa"] = "baseline"
    condition: Literal["hfha", "hfla", "lfha", "lfla", "human", "none"] = "none"
    preset: Literal["desk", "paper"] = "desk"
    episodes: int = Field(default=50, ge=1)
    sessions: int = Field(default=1, ge=1)
    seed: int = 0
    friction: int = Field(default=2, ge=0)
    out_dir: str | None = None


class RunStatus(BaseModel):
    run_id: int
    state: Literal["running", "finished", "failed"]
    request: RunRequest
    episode: int = 0
    step: int = 0
    error: str | None = None
    summary: dict | None = None
