"""Wire-protocol frames for the live session service.

JSON frames over a WebSocket (the socket framing delimits messages).
Every frame carries a schema version ``v`` and a ``type`` discriminator:
snapshot, command, notice, error, episode_end.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, ValidationError

PROTOCOL_VERSION = 1


class SnapshotFrame(BaseModel):
    v: int = PROTOCOL_VERSION
    type: Literal["snapshot"] = "snapshot"
    session_id: str
    seq: int
    sim_time: float
    x: list[float] = Field(min_length=3, max_length=3)
    x_g: list[float] = Field(min_length=3, max_length=3)
    e: list[float] = Field(min_length=3, max_length=3)
    subgoal: list[float] = Field(min_length=3, max_length=3)
    epsilon: float
    n_osc: int
    mode: Literal["awaiting_command", "executing", "finished"]


class CommandFrame(BaseModel):
    """Human command: primary-axis direction plus admission-radius choice."""

    v: int = PROTOCOL_VERSION
    type: Literal["command"] = "command"
    direction: Literal[-1, 1]
    radius_choice: Literal["big", "small"]
    client_ts: Optional[float] = None


class NoticeFrame(BaseModel):
    v: int = PROTOCOL_VERSION
    type: Literal["notice"] = "notice"
    kind: Literal["command_accepted", "command_overwritten", "info"]
    text: str = ""
    command: Optional[CommandFrame] = None


class ErrorFrame(BaseModel):
    v: int = PROTOCOL_VERSION
    type: Literal["error"] = "error"
    text: str


class EpisodeEndFrame(BaseModel):
    v: int = PROTOCOL_VERSION
    type: Literal["episode_end"] = "episode_end"
    session_id: str
    summary: dict


def parse_command(payload: dict) -> CommandFrame:
    """Validate an inbound client frame; raises ValidationError."""
    return CommandFrame.model_validate(payload)


__all__ = [
    "PROTOCOL_VERSION", "SnapshotFrame", "CommandFrame", "NoticeFrame",
    "ErrorFrame", "EpisodeEndFrame", "parse_command", "ValidationError",
]
