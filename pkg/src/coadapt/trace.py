"""Episode traces: per-cycle records plus a terminal summary.

Serialized as JSON lines, one record per line with the summary as the
final line. The same schema is produced by offline episodes and live
service sessions, and `validate_trace` is the shared checker.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

RECORD_FIELDS = {
    "type", "m", "sim_time", "x", "q", "subgoal", "command", "fired",
    "held", "ik_failed", "action_i", "action_j", "duration", "effort",
    "jerk", "n_osc_cum", "dist_to_goal_before", "reward",
}
COMMAND_FIELDS = {"u_h", "epsilon", "deltas", "delta_x", "decision_time"}
SUMMARY_FIELDS = {
    "type", "success", "total_time", "final_error", "osc_count",
    "jerk_integral", "microstep_count", "goal", "start", "epsilon_goal",
    "seed", "controller", "fidelity", "config_id", "aborted",
}


def _listify(value):
    if isinstance(value, np.ndarray):
        return [float(v) for v in value]
    return value


@dataclass
class CycleRecord:
    m: int
    sim_time: float
    x: list
    q: list
    subgoal: list
    command: dict
    fired: bool
    held: bool
    ik_failed: bool
    action_i: int
    action_j: int
    duration: float
    effort: float
    jerk: float
    n_osc_cum: int
    dist_to_goal_before: float
    reward: dict

    def to_dict(self) -> dict:
        d = asdict(self)
        d["type"] = "record"
        for k in ("x", "q", "subgoal"):
            d[k] = _listify(d[k])
        d["command"] = {k: _listify(v) for k, v in d["command"].items()}
        return d


@dataclass
class EpisodeSummary:
    success: bool
    total_time: float
    final_error: float
    osc_count: int
    jerk_integral: float
    microstep_count: int
    goal: list
    start: list
    epsilon_goal: float
    seed: int | None = None
    controller: str = ""
    fidelity: str = ""
    config_id: str = ""
    aborted: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["type"] = "summary"
        d["goal"] = _listify(d["goal"])
        d["start"] = _listify(d["start"])
        return d


@dataclass
class EpisodeTrace:
    records: list = field(default_factory=list)
    summary: EpisodeSummary | None = None

    def to_jsonl(self) -> str:
        lines = [json.dumps(r.to_dict(), sort_keys=True) for r in self.records]
        lines.append(json.dumps(self.summary.to_dict(), sort_keys=True))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "EpisodeTrace":
        rows = [json.loads(line) for line in text.strip().splitlines() if line.strip()]
        validate_trace(rows)
        records = []
        for row in rows[:-1]:
            row = dict(row)
            row.pop("type")
            records.append(CycleRecord(**row))
        srow = dict(rows[-1])
        srow.pop("type")
        return cls(records=records, summary=EpisodeSummary(**srow))

    @classmethod
    def read(cls, path) -> "EpisodeTrace":
        return cls.from_jsonl(Path(path).read_text())


def validate_trace(rows: list[dict]) -> None:
    """Schema check shared by simulator output and live session output."""
    if not rows:
        raise ValueError("empty trace")
    if rows[-1].get("type") != "summary":
        raise ValueError("trace must end with a summary line")
    if set(rows[-1]) != SUMMARY_FIELDS:
        raise ValueError(
            f"summary fields mismatch: {sorted(set(rows[-1]) ^ SUMMARY_FIELDS)}")
    last_t = -1.0
    for row in rows[:-1]:
        if row.get("type") != "record":
            raise ValueError("non-record line before the summary")
        if set(row) != RECORD_FIELDS:
            raise ValueError(
                f"record fields mismatch: {sorted(set(row) ^ RECORD_FIELDS)}")
        if set(row["command"]) != COMMAND_FIELDS:
            raise ValueError("command fields mismatch")
        if not row["sim_time"] > last_t:
            raise ValueError("sim_time must be strictly increasing")
        last_t = row["sim_time"]


def recompute_summary(records: list[CycleRecord], goal, start, epsilon_goal,
                      **labels) -> EpisodeSummary:
    """Rebuild the terminal summary from the records alone."""
    goal = np.asarray(goal, dtype=float)
    if records:
        final_x = np.asarray(records[-1].x, dtype=float)
        final_error = float(np.linalg.norm(goal - final_x))
        total_time = records[-1].sim_time
        osc = records[-1].n_osc_cum
        jerk = float(sum(r.jerk for r in records))
    else:
        final_error = float(np.linalg.norm(goal - np.asarray(start, dtype=float)))
        total_time = 0.0
        osc = 0
        jerk = 0.0
    return EpisodeSummary(
        success=final_error <= epsilon_goal,
        total_time=total_time,
        final_error=final_error,
        osc_count=osc,
        jerk_integral=jerk,
        microstep_count=len(records),
        goal=[float(v) for v in goal],
        start=[float(v) for v in np.asarray(start, dtype=float)],
        epsilon_goal=float(epsilon_goal),
        **labels,
    )


def format_replay(trace: EpisodeTrace) -> list[str]:
    """Human-readable step log: one line per record plus the summary."""
    lines = []
    for r in trace.records:
        cmd = r.command
        lines.append(
            "[{:8.3f}s] m={:<3d} u_h={:+d} eps={:.3f} dx=({:+.3f},{:+.3f},{:+.3f}) "
            "fired={} |e|={:.4f} osc={} r={:+.3f}".format(
                r.sim_time, r.m, cmd["u_h"], cmd["epsilon"],
                *cmd["delta_x"], "y" if r.fired else "n",
                r.dist_to_goal_before, r.n_osc_cum, r.reward["total"],
            )
        )
    s = trace.summary
    lines.append(
        "summary: success={} time={:.3f}s final_error={:.4f}m osc={} "
        "jerk={:.3g} steps={}".format(
            s.success, s.total_time, s.final_error, s.osc_count,
            s.jerk_integral, s.microstep_count,
        )
    )
    return lines
