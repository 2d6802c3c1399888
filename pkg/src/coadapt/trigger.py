"""Admission-sphere event gate and chatter accounting.

A new control action is admitted only when the end-effector is inside a
sphere of radius epsilon around the current waypoint and the quadratic
error energy has not increased since the previous evaluation sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigInvalid


@dataclass(frozen=True)
class TriggerConfig:
    W: np.ndarray               # 3x3 positive-definite weight
    epsilon_big: float
    epsilon_small: float
    epsilon_goal: float
    sign_dead_zone: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "W", np.asarray(self.W, dtype=float).reshape(3, 3))
        if not np.allclose(self.W, self.W.T, atol=1e-12):
            raise ConfigInvalid("trigger weight matrix must be symmetric")
        try:
            np.linalg.cholesky(self.W)
        except np.linalg.LinAlgError as exc:
            raise ConfigInvalid("trigger weight matrix must be positive definite") from exc
        if not self.epsilon_small < self.epsilon_big:
            raise ConfigInvalid("epsilon_small must be < epsilon_big")
        if not self.epsilon_goal <= self.epsilon_small:
            raise ConfigInvalid("epsilon_goal must be <= epsilon_small")

    @classmethod
    def from_config(cls, section: dict) -> "TriggerConfig":
        return cls(
            W=np.asarray(section["weight_matrix"], dtype=float),
            epsilon_big=section["epsilon_big"],
            epsilon_small=section["epsilon_small"],
            epsilon_goal=section["epsilon_goal"],
            sign_dead_zone=section["sign_dead_zone"],
        )


@dataclass(frozen=True)
class TriggerState:
    """Per-episode gate state; subgoal_index and osc_count never decrease."""

    subgoal: np.ndarray
    subgoal_index: int = 0
    V_prev: float = math.inf
    osc_count: int = 0
    last_error_signs: tuple = (0, 0, 0)

    def __post_init__(self):
        object.__setattr__(self, "subgoal", np.asarray(self.subgoal, dtype=float).reshape(3))

    def retarget(self, subgoal: np.ndarray) -> "TriggerState":
        """Aim the gate at a new waypoint; energy history resets, sign
        memory is kept so reversals across retargets still count."""
        return replace(self, subgoal=np.asarray(subgoal, dtype=float).reshape(3),
                       V_prev=math.inf)


def lyapunov(e: np.ndarray, W: np.ndarray) -> float:
    """Quadratic error energy 0.5 * e^T W e."""
    e = np.asarray(e, dtype=float).reshape(3)
    return 0.5 * float(e @ np.asarray(W, dtype=float) @ e)


def check_trigger(state: TriggerState, x: np.ndarray, epsilon: float,
                  W: np.ndarray) -> tuple[bool, TriggerState]:
    """Evaluate the gate at one sample.

    Fires when x is within epsilon of the subgoal and the error energy is
    non-increasing relative to the previous sample. On fire the subgoal
    index advances and the energy history resets; otherwise the history
    updates to the current energy.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    x = np.asarray(x, dtype=float).reshape(3)
    e = state.subgoal - x
    v_k = lyapunov(e, W)
    inside = float(np.linalg.norm(e)) <= epsilon
    if inside and v_k <= state.V_prev:
        fired = replace(state, subgoal_index=state.subgoal_index + 1,
                        V_prev=math.inf)
        return True, fired
    return False, replace(state, V_prev=v_k)


def _sign(value: float, dead_zone: float) -> int:
    if abs(value) < dead_zone:
        return 0
    return 1 if value > 0 else -1


def count_oscillation(state: TriggerState, e: np.ndarray, epsilon: float,
                      dead_zone: float = 1e-4) -> TriggerState:
    """Accumulate per-axis direction reversals of the subgoal error.

    e is the error to the current subgoal at this sample. A reversal is a
    strict sign flip between consecutive nonzero-sign samples on an axis;
    flips only count while the sample lies within 2*epsilon of the
    subgoal. Components inside the dead zone carry sign 0, never flip, and
    leave the axis sign memory untouched, so settling through zero does
    not hide a genuine reversal.
    """
    e = np.asarray(e, dtype=float).reshape(3)
    near = float(np.linalg.norm(e)) <= 2.0 * epsilon
    signs = tuple(_sign(v, dead_zone) for v in e)
    flips = 0
    kept = []
    for prev, cur in zip(state.last_error_signs, signs):
        if cur == 0:
            kept.append(prev)
            continue
        if near and prev * cur == -1:
            flips += 1
        kept.append(cur)
    return replace(state, osc_count=state.osc_count + flips,
                   last_error_signs=tuple(kept))
