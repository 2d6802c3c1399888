"""FastAPI service: live sessions over WebSocket plus a small REST API.

One session per WebSocket connection. REST endpoints expose health, the
active config, offline episode runs, and finished session traces.
"""

from __future__ import annotations

import asyncio
import json
import threading
from collections import Counter
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Query, WebSocket, WebSocketDisconnect
from pydantic import BaseModel, Field

from .. import dqn
from ..agents import ModelIndex, PosteriorTable
from ..config import load_config
from ..env import Environment, EpisodeConfig
from ..errors import CoadaptError
from .frames import ErrorFrame, ValidationError, parse_command
from .pressure import PressureAdapter
from .session import LiveSession

API_VERSION = "0.1.0"


class EpisodeRunRequest(BaseModel):
    seed: int = 0
    controller: Optional[str] = None    # default: env.controller from config
    fidelity: Optional[str] = None      # default: env.fidelity from config
    max_microsteps: Optional[int] = Field(default=None, gt=0)
    max_wall_time: Optional[float] = Field(default=None, gt=0)
    include_trace: bool = False


class EpisodeRunResponse(BaseModel):
    summary: dict
    records: int
    trace_jsonl: Optional[str] = None


class SessionInfo(BaseModel):
    session_id: str
    mode: str
    commands: int
    sim_time: float


class HealthResponse(BaseModel):
    status: str
    version: str


def _majority_model(trace) -> ModelIndex:
    pairs = Counter((r.action_i, r.action_j) for r in trace.records)
    if not pairs:
        return ModelIndex(1, 1)
    (i, j), _ = pairs.most_common(1)[0]
    return ModelIndex(i, j)


def create_app(cfg: dict | None = None, *, checkpoint: str | None = None,
               robot_policy: str = "fixed", ui_dir: str | None = None,
               pressure_source: str | None = None,
               trace_dir: str = "session_traces") -> FastAPI:
    cfg = cfg if cfg is not None else load_config()
    env = Environment(cfg)
    svc_cfg = cfg["experiment"]["service"]
    agent1_net = None
    if checkpoint is not None:
        agent1_net = dqn.load_checkpoint(checkpoint)[1]
    app = FastAPI(title="coadapt session service", version=API_VERSION)
    sessions: dict[str, LiveSession] = {}
    finished: dict[str, str] = {}   # session_id -> trace jsonl
    posterior = PosteriorTable()
    traces_path = Path(trace_dir)
    posterior_path = traces_path / "posterior.json"
    if posterior_path.exists():
        posterior = PosteriorTable.from_dict(
            json.loads(posterior_path.read_text()))

    app.state.env = env
    app.state.sessions = sessions
    app.state.posterior = posterior

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=API_VERSION)

    @app.get("/config")
    def get_config():
        return cfg

    @app.get("/sessions", response_model=list[SessionInfo])
    def list_sessions():
        return [SessionInfo(session_id=s.state.session_id, mode=s.state.mode,
                            commands=s.state.commands_seen,
                            sim_time=s.sim_time)
                for s in sessions.values()]

    @app.get("/sessions/{session_id}/trace")
    def session_trace(session_id: str):
        if session_id not in finished:
            raise HTTPException(404, f"no finished trace for {session_id}")
        return {"session_id": session_id, "trace_jsonl": finished[session_id]}

    @app.post("/episodes/run", response_model=EpisodeRunResponse)
    def run_episode(req: EpisodeRunRequest):
        env_cfg = cfg["env"]
        try:
            ec = EpisodeConfig(
                seed=req.seed,
                controller=req.controller or env_cfg["controller"],
                fidelity=req.fidelity or env_cfg["fidelity"],
                max_microsteps=req.max_microsteps or env_cfg["max_microsteps"],
                max_wall_time=req.max_wall_time or env_cfg["max_wall_time"])
            trace = env.run_episode(ec)
        except CoadaptError as exc:
            raise HTTPException(400, str(exc)) from exc
        return EpisodeRunResponse(
            summary=trace.summary.to_dict(), records=len(trace.records),
            trace_jsonl=trace.to_jsonl() if req.include_trace else None)

    @app.websocket("/ws/session")
    async def ws_session(ws: WebSocket,
                         seed: int = Query(default=0),
                         time_scale: float = Query(default=None),
                         gx: float = Query(default=None),
                         gy: float = Query(default=None),
                         gz: float = Query(default=None)):
        await ws.accept()
        scale = time_scale if time_scale is not None else svc_cfg["time_scale"]
        x_goal = None
        if gx is not None and gy is not None and gz is not None:
            x_goal = np.array([gx, gy, gz])

        async def send(frame: dict):
            await ws.send_text(json.dumps(frame))

        session = LiveSession(
            env, send, robot_policy=robot_policy, agent1_net=agent1_net,
            seed=seed, time_scale=scale, snapshot_hz=svc_cfg["snapshot_hz"],
            x_goal=x_goal)
        sessions[session.state.session_id] = session
        runner = asyncio.create_task(session.run())

        async def reader():
            while True:
                raw = await ws.receive_text()
                try:
                    cmd = parse_command(json.loads(raw))
                except (ValidationError, json.JSONDecodeError) as exc:
                    await send(ErrorFrame(
                        text=f"malformed command: {exc}").model_dump())
                    continue
                await session.offer_command(cmd)

        reader_task = asyncio.create_task(reader())
        try:
            done, _ = await asyncio.wait(
                {runner, reader_task}, return_when=asyncio.FIRST_COMPLETED)
            if reader_task in done and not runner.done():
                runner.cancel()   # client went away mid-episode
            trace = await runner
        except (WebSocketDisconnect, asyncio.CancelledError):
            runner.cancel()
            trace = await runner
        finally:
            reader_task.cancel()
        if trace is not None:
            _finalize(session, trace)
        try:
            await ws.close()
        except RuntimeError:
            pass

    def _finalize(session: LiveSession, trace):
        traces_path.mkdir(parents=True, exist_ok=True)
        text = trace.to_jsonl()
        finished[session.state.session_id] = text
        (traces_path / f"{session.state.session_id}.jsonl").write_text(text)
        if trace.records and not trace.summary.aborted:
            episode_reward = sum(r.reward["total"] for r in trace.records)
            posterior.update(_majority_model(trace), trace.summary.success,
                             episode_reward)
            posterior_path.write_text(json.dumps(posterior.to_dict(), indent=2))

    if pressure_source is not None:
        _attach_pressure_feed(app, sessions, pressure_source, svc_cfg)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def _attach_pressure_feed(app: FastAPI, sessions: dict, source: str,
                          svc_cfg: dict) -> None:
    """Read sensor samples from a byte stream and inject commands into the
    most recent live session."""

    @app.on_event("startup")
    async def start_feed():
        loop = asyncio.get_running_loop()
        adapter = PressureAdapter(svc_cfg["pressure_lo"], svc_cfg["pressure_hi"])
        radius = svc_cfg["default_radius"]

        def reader():
            from .frames import CommandFrame
            with open(source, "r", buffering=1) as fh:
                for line in fh:
                    edge = adapter.feed(line)
                    if edge is None:
                        continue
                    live = [s for s in sessions.values()
                            if s.state.mode != "finished"]
                    if not live:
                        continue
                    target = live[-1]
                    cmd = CommandFrame(direction=edge, radius_choice=radius)
                    asyncio.run_coroutine_threadsafe(
                        target.offer_command(cmd), loop)

        threading.Thread(target=reader, daemon=True,
                         name="pressure-feed").start()
