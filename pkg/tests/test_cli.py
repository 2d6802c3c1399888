import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from coadapt.cli import main
from coadapt.config import default_config
from coadapt.env import Environment, EpisodeConfig


@pytest.fixture()
def runner():
    return CliRunner()


def test_compare_missing_spec_names_path(runner, tmp_path):
    missing = tmp_path / "missing.file"
    result = runner.invoke(main, ["compare", "--spec", str(missing)])
    assert result.exit_code != 0
    assert "missing.file" in result.output


def test_replay_missing_file(runner, tmp_path):
    result = runner.invoke(main, ["replay", str(tmp_path / "nope.jsonl")])
    assert result.exit_code != 0
    assert "nope.jsonl" in result.output


def test_train_zero_episodes_writes_init_checkpoint(runner, tmp_path):
    out = tmp_path / "run"
    result = runner.invoke(main, ["train", "--reward", "r1", "--episodes", "0",
                                  "--seed", "4", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "checkpoints" / "final.damm").exists()


def test_replay_line_count_matches_trace(runner, tmp_path):
    env = Environment(default_config())
    trace = env.run_episode(EpisodeConfig(seed=19, fidelity="fast"))
    p = tmp_path / "trace.jsonl"
    trace.write(p)
    result = runner.invoke(main, ["replay", str(p)])
    assert result.exit_code == 0
    lines = [ln for ln in result.output.splitlines() if ln.strip()]
    assert len(lines) == trace.summary.microstep_count + 1


def test_profile_cli(runner, tmp_path):
    env = Environment(default_config())
    tdir = tmp_path / "traces"
    tdir.mkdir()
    for seed in (1, 2):
        env.run_episode(EpisodeConfig(seed=seed, fidelity="fast")).write(
            tdir / f"e{seed}.jsonl")
    result = runner.invoke(main, ["profile", str(tdir)])
    assert result.exit_code == 0
    assert "small fraction" in result.output


def test_compare_cli_smoke(runner, tmp_path):
    spec = {"seeds": [5, 6], "configs": [
        {"config_id": "event_fixed", "fidelity": "fast"},
        {"config_id": "fixed_freq", "fidelity": "fast"},
    ]}
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    out = tmp_path / "cmp"
    result = runner.invoke(main, ["compare", "--spec", str(spec_path),
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "rows.csv").exists()
    assert (out / "aggregates.csv").exists()
    assert len(list((out / "traces").glob("*.jsonl"))) == 4


def test_eval_requires_existing_checkpoint(runner, tmp_path):
    result = runner.invoke(main, ["eval", "--checkpoint",
                                  str(tmp_path / "no.damm"), "--episodes", "1"])
    assert result.exit_code != 0
    assert "no.damm" in result.output


def test_config_flag_round_trip(runner, tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"env": {"max_microsteps": 3}}))
    out = tmp_path / "run"
    result = runner.invoke(main, ["--config", str(cfg_path), "train",
                                  "--reward", "r2", "--episodes", "1",
                                  "--seed", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output


def test_unknown_config_key_fails_loudly(runner, tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"env": {"max_microstepz": 3}}))
    result = runner.invoke(main, ["--config", str(cfg_path), "train",
                                  "--reward", "r2", "--episodes", "0",
                                  "--seed", "1", "--out", str(tmp_path / "x")])
    assert result.exit_code != 0
    assert "unknown config key" in result.output
