import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from coadapt.config import default_config
from coadapt.errors import InsufficientData
from coadapt.service.app import create_app
from coadapt.service.estimate import empirical_profile
from coadapt.service.pressure import PressureAdapter, pressure_commands
from coadapt.trace import EpisodeTrace, validate_trace


@pytest.fixture()
def client(tmp_path):
    cfg = default_config()
    # generous budget so scripted loopback sessions survive a loaded host
    cfg["env"]["max_wall_time"] = 600.0
    cfg["env"]["max_microsteps"] = 600
    app = create_app(cfg, trace_dir=str(tmp_path / "traces"))
    with TestClient(app) as c:
        yield c


def drive_session(client, seed=11, scale=50, radius="small", n_max=400,
                  wrong_every=0):
    """Scripted loopback client; returns (session_id, summary, frames).

    radius "alternate" switches between big and small per command.
    """
    frames = []
    commands = 0
    last_mode = None
    sid = None
    with client.websocket_connect(
            f"/ws/session?seed={seed}&time_scale={scale}") as ws:
        while True:
            frame = json.loads(ws.receive_text())
            frames.append(frame)
            if frame["type"] == "snapshot":
                sid = frame["session_id"]
                entering_wait = (frame["mode"] == "awaiting_command"
                                 and last_mode != "awaiting_command")
                last_mode = frame["mode"]
                if entering_wait and commands < n_max:
                    e = frame["e"]
                    direction = 1 if e[0] >= 0 else -1
                    if wrong_every and commands % wrong_every == 0:
                        direction = -direction
                    r = radius
                    if radius == "alternate":
                        r = "big" if commands % 2 == 0 else "small"
                    ws.send_text(json.dumps({
                        "v": 1, "type": "command", "direction": direction,
                        "radius_choice": r}))
                    commands += 1
            elif frame["type"] == "episode_end":
                return sid, frame["summary"], frames


def test_health_and_config(client):
    assert client.get("/health").json()["status"] == "ok"
    cfg = client.get("/config").json()
    assert "robot" in cfg and "trigger" in cfg


def test_offline_episode_endpoint(client):
    r = client.post("/episodes/run", json={"seed": 3, "fidelity": "fast",
                                           "include_trace": True})
    body = r.json()
    assert r.status_code == 200
    trace = EpisodeTrace.from_jsonl(body["trace_jsonl"])
    assert len(trace.records) == body["records"]


def test_offline_episode_rejects_bad_controller(client):
    r = client.post("/episodes/run", json={"seed": 3, "controller": "nope"})
    assert r.status_code == 400


def test_loopback_session_completes_with_valid_trace(client):
    sid, summary, frames = drive_session(client, seed=11)
    assert summary["success"]
    r = client.get(f"/sessions/{sid}/trace")
    rows = [json.loads(line)
            for line in r.json()["trace_jsonl"].splitlines()]
    validate_trace(rows)   # same schema as simulator traces
    # exactly one command consumed per decision cycle
    trace = EpisodeTrace.from_jsonl(r.json()["trace_jsonl"])
    assert all(r_.command["u_h"] in (-1, 1) for r_ in trace.records)


def test_snapshot_times_monotone(client):
    _, _, frames = drive_session(client, seed=13)
    snaps = [f for f in frames if f["type"] == "snapshot"]
    times = [s["sim_time"] for s in snaps]
    assert all(b >= a for a, b in zip(times, times[1:]))
    seqs = [s["seq"] for s in snaps]
    assert all(b > a for a, b in zip(seqs, seqs[1:]))


def test_malformed_command_gets_error_frame(client):
    with client.websocket_connect("/ws/session?seed=1&time_scale=50") as ws:
        ws.receive_text()
        ws.send_text("not json")
        deadline = time.time() + 10
        while time.time() < deadline:
            frame = json.loads(ws.receive_text())
            if frame["type"] == "error":
                assert "malformed" in frame["text"]
                break
        else:
            pytest.fail("no error frame")
        ws.send_text(json.dumps({"v": 1, "type": "command", "direction": 2,
                                 "radius_choice": "big"}))
        while True:
            frame = json.loads(ws.receive_text())
            if frame["type"] == "error":
                break


def test_command_slot_overwrite_notice(client):
    with client.websocket_connect("/ws/session?seed=1&time_scale=2") as ws:
        ws.receive_text()
        cmd = {"v": 1, "type": "command", "direction": 1,
               "radius_choice": "big"}
        ws.send_text(json.dumps(cmd))
        ws.send_text(json.dumps(cmd))
        kinds = []
        deadline = time.time() + 10
        while len(kinds) < 2 and time.time() < deadline:
            frame = json.loads(ws.receive_text())
            if frame["type"] == "notice":
                kinds.append(frame["kind"])
        assert kinds[0] == "command_accepted"
        assert "command_overwritten" in kinds


def test_sessions_listing(client):
    sid, _, _ = drive_session(client, seed=17)
    listing = client.get("/sessions").json()
    assert any(s["session_id"] == sid for s in listing)


def test_pressure_single_rising_edge():
    adapter = PressureAdapter(400, 600)
    edges = adapter.feed_lines(["0", "0", "900", "900"])
    assert edges == [1]


def test_pressure_hysteresis_band_no_flutter():
    adapter = PressureAdapter(400, 600)
    adapter.feed_lines(["0", "700"])       # arm high
    edges = adapter.feed_lines(["580", "620", "580", "620"])
    assert edges == []


def test_pressure_fixture_edge_list():
    samples = ["0", "100", "650", "700", "500", "350", "80", "610",
               "junk", "590", "300", "900"]
    adapter = PressureAdapter(400, 600)
    edges = adapter.feed_lines(samples)
    assert edges == [1, -1, 1, -1, 1]
    assert adapter.skipped == 1


def test_pressure_commands_generator():
    cmds = list(pressure_commands(["0", "900", "100"], 400, 600,
                                  radius_choice="small"))
    assert [c["direction"] for c in cmds] == [1, -1]
    assert all(c["radius_choice"] == "small" for c in cmds)


def test_empirical_profile_perfect_client(client):
    traces = []
    for seed in (21, 22):
        sid, _, _ = drive_session(client, seed=seed, radius="alternate")
        text = client.get(f"/sessions/{sid}/trace").json()["trace_jsonl"]
        traces.append(EpisodeTrace.from_jsonl(text))
    prof = empirical_profile(traces, epsilon_big=0.05)
    assert prof["big"]["error_rate"] == 0.0
    assert prof["small"]["error_rate"] == 0.0
    assert prof["big"]["commands"] >= 10
    assert prof["small"]["commands"] >= 10


def test_empirical_profile_insufficient_data():
    with pytest.raises(InsufficientData):
        empirical_profile([], epsilon_big=0.05)


def test_empirical_profile_recovers_planted_error_rate(client):
    """A client that deliberately inverts every fifth command plants a 20%
    error rate; the estimate must sit within its binomial CI."""
    traces = []
    for seed in (31, 32, 33):
        sid, _, _ = drive_session(client, seed=seed, radius="alternate",
                                  wrong_every=5)
        text = client.get(f"/sessions/{sid}/trace").json()["trace_jsonl"]
        traces.append(EpisodeTrace.from_jsonl(text))
    prof = empirical_profile(traces, epsilon_big=0.05)
    n = prof["big"]["commands"] + prof["small"]["commands"]
    pooled = (prof["big"]["error_rate"] * prof["big"]["commands"]
              + prof["small"]["error_rate"] * prof["small"]["commands"]) / n
    ci_half = 1.96 * np.sqrt(0.2 * 0.8 / n)
    assert abs(pooled - 0.2) <= ci_half, (pooled, n, ci_half)
