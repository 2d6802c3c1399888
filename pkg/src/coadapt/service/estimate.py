"""Online estimation of the human profile from recorded session traces."""

from __future__ import annotations

import numpy as np

from ..errors import InsufficientData
from ..trace import EpisodeTrace

MIN_COMMANDS_PER_RADIUS = 10


def empirical_profile(traces: list[EpisodeTrace], epsilon_big: float,
                      primary_axis: int = 0) -> dict:
    """Per-radius error rate, decision frequency, and decision time.

    A command counts as an error when its direction points away from the
    goal along the primary axis, judged at the position the command was
    issued from. Raises InsufficientData below 10 commands per radius.
    """
    stats = {"big": {"n": 0, "errors": 0, "decision_times": [], "gaps": []},
             "small": {"n": 0, "errors": 0, "decision_times": [], "gaps": []}}
    for trace in traces:
        goal = np.asarray(trace.summary.goal, dtype=float)
        prev_x = np.asarray(trace.summary.start, dtype=float)
        prev_t = 0.0
        for rec in trace.records:
            cmd = rec.command
            radius = "big" if cmd["epsilon"] >= epsilon_big else "small"
            e_primary = goal[primary_axis] - prev_x[primary_axis]
            intended = 1 if e_primary >= 0 else -1
            s = stats[radius]
            s["n"] += 1
            if cmd["u_h"] != intended:
                s["errors"] += 1
            s["decision_times"].append(cmd["decision_time"])
            s["gaps"].append(rec.sim_time - prev_t)
            prev_x = np.asarray(rec.x, dtype=float)
            prev_t = rec.sim_time
    for radius, s in stats.items():
        if s["n"] < MIN_COMMANDS_PER_RADIUS:
            raise InsufficientData(
                f"only {s['n']} commands at radius {radius!r}; "
                f"need {MIN_COMMANDS_PER_RADIUS}")
    out = {}
    for radius, s in stats.items():
        mean_gap = float(np.mean(s["gaps"]))
        out[radius] = {
            "error_rate": s["errors"] / s["n"],
            "decision_frequency": 1.0 / mean_gap if mean_gap > 0 else 0.0,
            "mean_decision_time": float(np.mean(s["decision_times"])),
            "commands": s["n"],
        }
    return out
