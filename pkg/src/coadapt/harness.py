"""Four-configuration comparison, metrics aggregation, and exports.

Every cross-configuration comparison runs the same seed list (paired
design). Outputs are plain CSV rows plus bootstrap-aggregate CSV and one
JSONL trace per episode; plotting stays out of scope.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dqn
from .agents import ModelIndex
from .env import (DEFAULT_REWARD_WEIGHTS, Environment, EpisodeConfig,
                  FixedModelPolicy, GreedyPolicy)
from .dqn import DualLearner
from .errors import ConfigInvalid, EmptyTraceSet, MissingCheckpoint
from .trace import EpisodeTrace

CONFIG_IDS = ("fixed_freq", "event_fixed", "dammrl_r1", "dammrl_r2")
METRIC_COLUMNS = ("success", "total_time", "final_error", "osc_count",
                  "jerk_integral", "microsteps")
PROFILE_BANDS = ((0.0, 0.05), (0.05, 0.15), (0.15, float("inf")))


@dataclass(frozen=True)
class ExperimentSpec:
    """One experimental configuration over a shared seed list."""

    config_id: str
    episodes: int
    seeds: tuple
    reward_weights: tuple = DEFAULT_REWARD_WEIGHTS
    checkpoint: str | None = None
    fidelity: str = "dynamic"
    fixed_model: ModelIndex = ModelIndex(1, 2)

    def __post_init__(self):
        if self.config_id not in CONFIG_IDS:
            raise ConfigInvalid(f"unknown config_id {self.config_id!r}")
        if len(self.seeds) != self.episodes:
            raise ConfigInvalid("seed list length must equal episode count")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigInvalid("seeds must be distinct")
        if self.config_id == "dammrl_r1" and self.reward_weights[1] != 0.0:
            raise ConfigInvalid("dammrl_r1 requires beta = 0")
        if self.config_id.startswith("dammrl") and self.checkpoint is None:
            raise ConfigInvalid(f"{self.config_id} needs a checkpoint")

    @property
    def controller(self) -> str:
        if self.config_id == "fixed_freq":
            return "fixed_frequency"
        if self.config_id == "event_fixed":
            return "event_fixed_model"
        return "dammrl"


def spec_from_dict(d: dict, default_seeds=None) -> ExperimentSpec:
    seeds = tuple(d.get("seeds", default_seeds or ()))
    return ExperimentSpec(
        config_id=d["config_id"],
        episodes=d.get("episodes", len(seeds)),
        seeds=seeds,
        reward_weights=tuple(d.get("reward_weights", DEFAULT_REWARD_WEIGHTS)),
        checkpoint=d.get("checkpoint"),
        fidelity=d.get("fidelity", "dynamic"),
        fixed_model=ModelIndex(*d.get("fixed_model", (1, 2))),
    )


def load_spec_file(path) -> list[ExperimentSpec]:
    """Comparison spec: {"seeds": [...], "configs": [{...}, ...]}."""
    p = Path(path)
    if not p.exists():
        raise ConfigInvalid(f"spec file not found: {p}")
    doc = json.loads(p.read_text())
    default_seeds = doc.get("seeds")
    return [spec_from_dict(c, default_seeds) for c in doc["configs"]]


@dataclass
class MetricsTable:
    rows: list = field(default_factory=list)   # dict per episode
    aggregates: list = field(default_factory=list)

    def append_row(self, config_id: str, seed: int, trace: EpisodeTrace) -> None:
        s = trace.summary
        self.rows.append({
            "config_id": config_id, "seed": int(seed),
            "success": int(s.success), "total_time": s.total_time,
            "final_error": s.final_error, "osc_count": s.osc_count,
            "jerk_integral": s.jerk_integral, "microsteps": s.microstep_count,
        })

    def aggregate(self, n_resamples: int = 1000, ci_seed: int = 0) -> None:
        self.aggregates = []
        for config_id in sorted({r["config_id"] for r in self.rows}):
            sub = [r for r in self.rows if r["config_id"] == config_id]
            for metric in METRIC_COLUMNS:
                values = np.array([float(r[metric]) for r in sub])
                lo, hi = bootstrap_ci(values, n_resamples,
                                      np.random.default_rng([ci_seed, 1]))
                self.aggregates.append({
                    "config_id": config_id, "metric": metric,
                    "mean": float(values.mean()),
                    "median": float(np.median(values)),
                    "ci_lo": lo, "ci_hi": hi, "n": len(values),
                })

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "rows.csv").open("w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=["config_id", "seed", *METRIC_COLUMNS])
            w.writeheader()
            w.writerows(self.rows)
        with (out / "aggregates.csv").open("w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=["config_id", "metric", "mean",
                                              "median", "ci_lo", "ci_hi", "n"])
            w.writeheader()
            w.writerows(self.aggregates)

    @classmethod
    def read_rows(cls, path) -> "MetricsTable":
        table = cls()
        with Path(path).open(newline="") as f:
            for row in csv.DictReader(f):
                table.rows.append({
                    "config_id": row["config_id"], "seed": int(row["seed"]),
                    "success": int(row["success"]),
                    "total_time": float(row["total_time"]),
                    "final_error": float(row["final_error"]),
                    "osc_count": int(row["osc_count"]),
                    "jerk_integral": float(row["jerk_integral"]),
                    "microsteps": int(row["microsteps"]),
                })
        return table


def bootstrap_ci(values: np.ndarray, n_resamples: int,
                 rng: np.random.Generator, level: float = 0.95):
    """Nonparametric percentile bootstrap CI for the mean."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyTraceSet("cannot bootstrap an empty sample")
    if values.size == 1:
        return float(values[0]), float(values[0])
    means = np.empty(n_resamples)
    n = values.size
    for b in range(n_resamples):
        means[b] = values[rng.integers(0, n, n)].mean()
    alpha = (1.0 - level) / 2.0
    return (float(np.quantile(means, alpha)),
            float(np.quantile(means, 1.0 - alpha)))


def bootstrap_diff_ci(a: np.ndarray, b: np.ndarray, n_resamples: int,
                      rng: np.random.Generator, level: float = 0.95):
    """Percentile bootstrap CI for mean(a) - mean(b), paired by index."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("paired bootstrap needs equal-length samples")
    diffs = a - b
    means = np.empty(n_resamples)
    n = diffs.size
    for k in range(n_resamples):
        means[k] = diffs[rng.integers(0, n, n)].mean()
    alpha = (1.0 - level) / 2.0
    return (float(np.quantile(means, alpha)),
            float(np.quantile(means, 1.0 - alpha)))


def _policy_for(spec: ExperimentSpec, env: Environment):
    if spec.config_id in ("fixed_freq", "event_fixed"):
        return FixedModelPolicy(spec.fixed_model)
    nets = dqn.load_checkpoint(spec.checkpoint)
    lc = env.cfg["learner"]
    learner = DualLearner.create(np.random.default_rng(0),
                                 hidden=tuple(lc["hidden_sizes"]),
                                 buffer_capacity=2)
    learner.net0, learner.net1 = nets[0], nets[1]
    return GreedyPolicy(learner)


def run_comparison(specs: list[ExperimentSpec], env: Environment,
                   out_dir, n_resamples: int | None = None,
                   progress=None) -> MetricsTable:
    """Run every spec over the shared seed list; write rows, aggregates,
    and per-episode traces."""
    if not specs:
        raise ConfigInvalid("no experiment specs given")
    seed_lists = {tuple(s.seeds) for s in specs}
    if len(seed_lists) != 1:
        raise ConfigInvalid("paired design requires one shared seed list")
    for spec in specs:
        if spec.checkpoint is not None and not Path(spec.checkpoint).exists():
            raise MissingCheckpoint(f"checkpoint not found: {spec.checkpoint}")
    out = Path(out_dir)
    traces_dir = out / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    if n_resamples is None:
        n_resamples = int(env.cfg["experiment"]["bootstrap_resamples"])

    table = MetricsTable()
    for spec in specs:
        policy = _policy_for(spec, env)
        for k, seed in enumerate(spec.seeds):
            ec = EpisodeConfig(
                seed=int(seed), controller=spec.controller,
                fidelity=spec.fidelity, reward_weights=spec.reward_weights,
                fixed_model=spec.fixed_model, config_id=spec.config_id)
            trace = env.run_episode(ec, policy)
            trace.write(traces_dir / f"{spec.config_id}_{seed}.jsonl")
            table.append_row(spec.config_id, seed, trace)
            if progress is not None:
                progress(spec.config_id, k + 1, len(spec.seeds))
    table.aggregate(n_resamples)
    table.write(out)
    return table


def step_size_profile(traces: list[EpisodeTrace]) -> dict:
    """Fraction of small-step selections per axis, banded by distance to
    goal at selection time. Bands in metres: [0, 0.05), [0.05, 0.15),
    [0.15, inf)."""
    counts = {band: np.zeros(3) for band in PROFILE_BANDS}
    totals = {band: np.zeros(3) for band in PROFILE_BANDS}
    n_commands = 0
    for trace in traces:
        for rec in trace.records:
            d = rec.dist_to_goal_before
            bits = ModelIndex(1, rec.action_j).bits
            n_commands += 1
            for band in PROFILE_BANDS:
                if band[0] <= d < band[1]:
                    for axis, bit in enumerate(bits):
                        totals[band][axis] += 1
                        if bit == 0:
                            counts[band][axis] += 1
    if n_commands == 0:
        raise EmptyTraceSet("no step commands in the given traces")
    profile = {}
    for band in PROFILE_BANDS:
        frac = np.divide(counts[band], totals[band],
                         out=np.full(3, np.nan), where=totals[band] > 0)
        profile[band] = {
            "small_fraction": [float(v) for v in frac],
            "commands": int(totals[band][0]),
        }
    return profile


def write_profile_csv(profile: dict, path) -> None:
    with Path(path).open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["band_lo_m", "band_hi_m", "commands",
                    "small_frac_x", "small_frac_y", "small_frac_z"])
        for band, row in profile.items():
            hi = band[1] if band[1] != float("inf") else ""
            w.writerow([band[0], hi, row["commands"], *row["small_fraction"]])
