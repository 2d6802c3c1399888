"""Human and robot decision agents and the step-composition rule.

The decision space is the 2 x 8 grid of (admission-radius choice i,
per-axis step-magnitude combination j). The stochastic human picks the
primary-axis direction with a radius-dependent error rate; the robot
decodes j into small/big magnitudes per axis. A Cartesian micro-step is
composed from the human direction on the primary axis and error-sign
corrections on the orthogonal axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid

N_MODELS_I = 2
N_MODELS_J = 8


@dataclass(frozen=True)
class ModelIndex:
    """One cell of the 2 x 8 multi-model grid."""

    i: int  # 1 = big admission radius, 2 = small
    j: int  # 1..8, encodes (b_x, b_y, b_z) via j = 1 + bx + 2 by + 4 bz

    def __post_init__(self):
        if self.i not in (1, 2):
            raise ValueError("i must be 1 or 2")
        if not 1 <= self.j <= 8:
            raise ValueError("j must be in 1..8")

    @property
    def bits(self) -> tuple[int, int, int]:
        code = self.j - 1
        return code & 1, (code >> 1) & 1, (code >> 2) & 1

    @staticmethod
    def from_bits(i: int, bits: tuple[int, int, int]) -> "ModelIndex":
        bx, by, bz = bits
        return ModelIndex(i, 1 + bx + 2 * by + 4 * bz)

    def flat(self) -> int:
        """0..15 index used for one-hot state encoding."""
        return (self.i - 1) * N_MODELS_J + (self.j - 1)


ALL_MODELS = tuple(ModelIndex(i, j)
                   for i in (1, 2) for j in range(1, N_MODELS_J + 1))


@dataclass(frozen=True)
class StepMagnitudes:
    x_small: float
    x_big: float
    y_small: float
    y_big: float
    z_small: float
    z_big: float

    def __post_init__(self):
        for axis in "xyz":
            s, b = getattr(self, f"{axis}_small"), getattr(self, f"{axis}_big")
            if not 0 < s < b:
                raise ConfigInvalid(f"need 0 < {axis}_small < {axis}_big")

    @classmethod
    def from_config(cls, section: dict) -> "StepMagnitudes":
        return cls(**section)

    def pair(self, axis: int) -> tuple[float, float]:
        name = "xyz"[axis]
        return getattr(self, f"{name}_small"), getattr(self, f"{name}_big")


@dataclass(frozen=True)
class HumanProfile:
    """Direction error rates and decision times per admission radius."""

    err_rate_big: float = 0.20
    err_rate_small: float = 0.10
    t_dec_big: float = 0.5
    t_dec_small: float = 1.0

    def __post_init__(self):
        for r in (self.err_rate_big, self.err_rate_small):
            if not 0 <= r < 0.5:
                raise ConfigInvalid("error rates must be in [0, 0.5)")
        if not self.t_dec_big < self.t_dec_small:
            raise ConfigInvalid("big-radius decisions must be faster")

    @classmethod
    def from_config(cls, section: dict) -> "HumanProfile":
        return cls(**section)


@dataclass(frozen=True)
class StepCommand:
    """One composed micro-step command."""

    u_h: int                    # -1 or +1 on the primary axis
    epsilon: float              # chosen admission radius, m
    deltas: tuple               # per-axis magnitudes (all positive)
    delta_x_vec: np.ndarray     # signed 3-vector actually commanded
    decision_time: float

    def __post_init__(self):
        object.__setattr__(self, "delta_x_vec",
                           np.asarray(self.delta_x_vec, dtype=float).reshape(3))


def human_decide(profile: HumanProfile, e: np.ndarray, action_i: int,
                 rng: np.random.Generator, trigger_cfg,
                 primary_axis: int = 0) -> tuple[int, float, float]:
    """Simulated human: pick the admission radius and primary direction.

    The intended direction is the sign of the primary-axis error (zero
    counts as +1); it flips with the radius-dependent error rate. Returns
    (u_h, epsilon, decision_time).
    """
    if action_i not in (1, 2):
        raise ValueError("action_i must be 1 or 2")
    e = np.asarray(e, dtype=float)
    if action_i == 1:
        epsilon = trigger_cfg.epsilon_big
        err_rate, t_dec = profile.err_rate_big, profile.t_dec_big
    else:
        epsilon = trigger_cfg.epsilon_small
        err_rate, t_dec = profile.err_rate_small, profile.t_dec_small
    intended = 1 if e[primary_axis] >= 0 else -1
    u_h = -intended if rng.random() < err_rate else intended
    return u_h, epsilon, t_dec


def robot_act(magnitudes: StepMagnitudes, action_j: int) -> tuple[float, float, float]:
    """Decode a magnitude combination into per-axis step lengths."""
    bits = ModelIndex(1, action_j).bits
    return tuple(magnitudes.pair(axis)[bit] for axis, bit in enumerate(bits))


def encode_magnitudes(magnitudes: StepMagnitudes, deltas) -> int:
    """Inverse of robot_act; raises if a delta is not a configured value."""
    bits = []
    for axis, d in enumerate(deltas):
        small, big = magnitudes.pair(axis)
        if d == small:
            bits.append(0)
        elif d == big:
            bits.append(1)
        else:
            raise ValueError(f"delta {d} not a configured magnitude on axis {axis}")
    return ModelIndex.from_bits(1, tuple(bits)).j


def compose_step(u_h: int, deltas, e: np.ndarray,
                 primary_axis: int = 0, dead_zone: float = 0.0) -> np.ndarray:
    """Compose the signed Cartesian micro-step.

    The primary component is u_h * delta; each orthogonal component is
    sign(e_axis) * delta with sign(0) = 0, so a converged axis stays put.
    dead_zone widens the zero case: |e_axis| below it counts as converged,
    keeping solver residue from re-exciting a settled axis.
    """
    if u_h not in (-1, 1):
        raise ValueError("u_h must be -1 or +1")
    e = np.asarray(e, dtype=float).reshape(3)
    deltas = [float(d) for d in deltas]
    if any(d <= 0 for d in deltas):
        raise ValueError("deltas must be positive")
    step = np.zeros(3)
    for axis in range(3):
        if axis == primary_axis:
            step[axis] = u_h * deltas[axis]
        elif abs(e[axis]) > dead_zone or (e[axis] != 0.0 and dead_zone == 0.0):
            step[axis] = float(np.sign(e[axis])) * deltas[axis]
    return step


@dataclass
class ModelStats:
    successes: int = 0
    failures: int = 0
    reward_sum: float = 0.0
    episodes: int = 0

    @property
    def posterior_mean(self) -> float:
        # Beta(1 + s, 1 + f) mean
        return (self.successes + 1) / (self.successes + self.failures + 2)

    @property
    def mean_reward(self) -> float:
        return self.reward_sum / self.episodes if self.episodes else 0.0


@dataclass
class PosteriorTable:
    """Per-model Beta posterior over episode success plus mean reward."""

    stats: dict = field(default_factory=lambda: {m: ModelStats() for m in ALL_MODELS})

    def update(self, model: ModelIndex, success: bool, episode_reward: float) -> None:
        s = self.stats[model]
        if success:
            s.successes += 1
        else:
            s.failures += 1
        s.reward_sum += float(episode_reward)
        s.episodes += 1

    def ranking(self) -> list[ModelIndex]:
        """Models best-first: posterior mean success, then mean reward,
        then lower j, then lower i."""
        return sorted(
            self.stats.keys(),
            key=lambda m: (-self.stats[m].posterior_mean,
                           -self.stats[m].mean_reward, m.j, m.i),
        )

    def best(self) -> ModelIndex:
        return self.ranking()[0]

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "stats": {
                f"{m.i},{m.j}": {
                    "successes": s.successes,
                    "failures": s.failures,
                    "reward_sum": s.reward_sum,
                    "episodes": s.episodes,
                }
                for m, s in self.stats.items()
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PosteriorTable":
        if payload.get("version") != 1:
            raise ConfigInvalid("unsupported posterior table version")
        table = cls()
        for key, raw in payload["stats"].items():
            i, j = (int(v) for v in key.split(","))
            table.stats[ModelIndex(i, j)] = ModelStats(**raw)
        return table


def posterior_update(table: PosteriorTable, model: ModelIndex, success: bool,
                     episode_reward: float) -> PosteriorTable:
    """Record one episode outcome for the model that produced it."""
    table.update(model, success, episode_reward)
    return table
