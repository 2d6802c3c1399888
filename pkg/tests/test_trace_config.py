import json

import numpy as np
import pytest

from coadapt.config import ENV_VAR, default_config, load_config
from coadapt.errors import ConfigInvalid
from coadapt.trace import (CycleRecord, EpisodeTrace, format_replay,
                           recompute_summary, validate_trace)


def make_record(k, t):
    return CycleRecord(
        m=k, sim_time=t, x=[0.3 + 0.01 * k, 0.0, 0.2], q=[0.1] * 6,
        subgoal=[0.3 + 0.01 * (k + 1), 0.0, 0.2],
        command={"u_h": 1, "epsilon": 0.05, "deltas": [0.01, 0.01, 0.01],
                 "delta_x": [0.01, 0.0, 0.0], "decision_time": 0.5},
        fired=True, held=False, ik_failed=False, action_i=1, action_j=1,
        duration=0.1, effort=0.05, jerk=1e-4, n_osc_cum=k // 3,
        dist_to_goal_before=0.2 - 0.01 * k,
        reward={"accuracy": 0.4, "time_penalty": -0.1, "effort_penalty": -0.0,
                "osc_penalty": 0.0, "success_bonus": 0.0, "total": 0.3})


def make_trace(n=5):
    records = [make_record(k, 0.6 * (k + 1)) for k in range(n)]
    summary = recompute_summary(records, [0.5, 0.0, 0.2], [0.3, 0.0, 0.2],
                                0.01, seed=1, controller="event_fixed_model",
                                fidelity="fast", config_id="event_fixed")
    return EpisodeTrace(records=records, summary=summary)


def test_jsonl_round_trip_lossless():
    trace = make_trace()
    text = trace.to_jsonl()
    clone = EpisodeTrace.from_jsonl(text)
    assert clone.to_jsonl() == text


def test_summary_recompute_consistency():
    trace = make_trace()
    s2 = recompute_summary(trace.records, trace.summary.goal,
                           trace.summary.start, trace.summary.epsilon_goal,
                           seed=1, controller="event_fixed_model",
                           fidelity="fast", config_id="event_fixed")
    assert s2 == trace.summary


def test_validator_rejects_missing_summary():
    rows = [r.to_dict() for r in make_trace().records]
    with pytest.raises(ValueError):
        validate_trace(rows)


def test_validator_rejects_bad_fields():
    trace = make_trace()
    rows = [r.to_dict() for r in trace.records] + [trace.summary.to_dict()]
    rows[0]["extra"] = 1
    with pytest.raises(ValueError):
        validate_trace(rows)


def test_validator_requires_monotone_time():
    trace = make_trace()
    rows = [r.to_dict() for r in trace.records] + [trace.summary.to_dict()]
    rows[1]["sim_time"] = rows[0]["sim_time"]
    with pytest.raises(ValueError):
        validate_trace(rows)


def test_replay_line_count():
    trace = make_trace(7)
    lines = format_replay(trace)
    assert len(lines) == 7 + 1


def test_empty_episode_summary():
    s = recompute_summary([], [0.3, 0.0, 0.2], [0.3, 0.0, 0.2], 0.01,
                          seed=0, controller="event_fixed_model",
                          fidelity="fast", config_id="")
    assert s.success and s.microstep_count == 0 and s.total_time == 0.0


def test_default_config_valid():
    cfg = default_config()
    assert set(cfg) == {"robot", "trigger", "agents", "learner", "env",
                        "experiment"}


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"env": {"max_walltime": 10}}))
    with pytest.raises(ConfigInvalid, match="unknown config key"):
        load_config(p)


def test_partial_override_merges(tmp_path):
    p = tmp_path / "ok.json"
    p.write_text(json.dumps({"env": {"max_wall_time": 10.0}}))
    cfg = load_config(p)
    assert cfg["env"]["max_wall_time"] == 10.0
    assert cfg["env"]["max_microsteps"] == default_config()["env"]["max_microsteps"]


def test_env_var_override(tmp_path, monkeypatch):
    p = tmp_path / "env.json"
    p.write_text(json.dumps({"env": {"max_microsteps": 17}}))
    monkeypatch.setenv(ENV_VAR, str(p))
    cfg = load_config()
    assert cfg["env"]["max_microsteps"] == 17


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigInvalid, match="not found"):
        load_config(tmp_path / "absent.json")


def test_cross_field_validation(tmp_path):
    p = tmp_path / "bad2.json"
    p.write_text(json.dumps({"trigger": {"epsilon_small": 0.06}}))
    with pytest.raises(ConfigInvalid):
        load_config(p)
