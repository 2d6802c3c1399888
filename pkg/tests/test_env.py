import numpy as np
import pytest

from coadapt.agents import HumanProfile, ModelIndex
from coadapt.config import default_config
from coadapt.env import Environment, EpisodeConfig, FixedModelPolicy
from coadapt.errors import ConfigInvalid
from coadapt.trace import EpisodeTrace, recompute_summary


@pytest.fixture(scope="module")
def env():
    return Environment(default_config())


@pytest.fixture(scope="module")
def clean_env():
    """No sensing noise, noiseless human: scripted-scenario fixture."""
    cfg = default_config()
    cfg["env"]["sensor_noise"] = 0.0
    e = Environment(cfg)
    e.human = HumanProfile(err_rate_big=0.0, err_rate_small=0.0,
                           t_dec_big=0.5, t_dec_small=1.0)
    return e


def test_converged_start_trivial(env):
    x = np.array([0.35, 0.0, 0.25])
    ec = EpisodeConfig(seed=1, x_start=x, x_goal=x)
    trace = env.run_episode(ec)
    assert trace.summary.success
    assert trace.summary.microstep_count == 0
    assert trace.summary.total_time == 0.0


def test_converged_start_same_for_fixed_frequency(env):
    """Both controllers share the trivial terminated-at-start trace."""
    x = np.array([0.35, 0.0, 0.25])
    a = env.run_episode(EpisodeConfig(seed=1, x_start=x, x_goal=x))
    b = env.run_episode(EpisodeConfig(seed=1, x_start=x, x_goal=x,
                                      controller="fixed_frequency"))
    assert a.records == b.records == []
    for field in ("success", "total_time", "final_error", "osc_count",
                  "microstep_count", "goal", "start"):
        assert getattr(a.summary, field) == getattr(b.summary, field)


def test_scripted_monotone_primary_approach(clean_env):
    """Noiseless human, goal offset along the primary axis only: errors
    shrink monotonically and no oscillation is counted."""
    ec = EpisodeConfig(seed=2, fidelity="fast", fixed_model=ModelIndex(1, 1),
                       x_start=np.array([0.30, 0.05, 0.25]),
                       x_goal=np.array([0.42, 0.05, 0.25]))
    trace = clean_env.run_episode(ec)
    assert trace.summary.success
    assert trace.summary.osc_count == 0
    dists = [r.dist_to_goal_before for r in trace.records]
    assert all(b < a for a, b in zip(dists, dists[1:]))


def test_scripted_fixed_frequency_premature_retarget_chatters(clean_env):
    """Same scenario, but ticks faster than the micro-step execution:
    reversals appear."""
    ec = EpisodeConfig(seed=2, fidelity="dynamic", controller="fixed_frequency",
                       fixed_period=0.05, fixed_model=ModelIndex(1, 2),
                       x_start=np.array([0.28, 0.05, 0.25]),
                       x_goal=np.array([0.44, 0.05, 0.25]))
    trace = clean_env.run_episode(ec)
    assert trace.summary.osc_count > 0


def test_event_gate_no_preemption(env):
    """Event-gated cycles never overlap: each record's duration fits
    between consecutive timestamps."""
    ec = EpisodeConfig(seed=5, fidelity="fast")
    trace = env.run_episode(ec)
    t_prev = 0.0
    for rec in trace.records:
        assert rec.sim_time >= t_prev + rec.duration - 1e-9
        t_prev = rec.sim_time


def test_clock_identity(env):
    """total_time equals the sum of decision and execution durations."""
    ec = EpisodeConfig(seed=7, fidelity="fast")
    trace = env.run_episode(ec)
    accounted = sum(r.command["decision_time"] + r.duration
                    for r in trace.records)
    assert trace.summary.total_time == pytest.approx(accounted, abs=1e-9)


def test_fast_mode_determinism(env):
    a = env.run_episode(EpisodeConfig(seed=11, fidelity="fast"))
    b = env.run_episode(EpisodeConfig(seed=11, fidelity="fast"))
    assert a.to_jsonl() == b.to_jsonl()


def test_fixed_frequency_determinism(env):
    a = env.run_episode(EpisodeConfig(seed=11, controller="fixed_frequency",
                                      fidelity="fast"))
    b = env.run_episode(EpisodeConfig(seed=11, controller="fixed_frequency",
                                      fidelity="fast"))
    assert a.to_jsonl() == b.to_jsonl()


def test_summary_recomputable(env):
    ec = EpisodeConfig(seed=13, fidelity="fast")
    trace = env.run_episode(ec)
    s = trace.summary
    s2 = recompute_summary(trace.records, s.goal, s.start, s.epsilon_goal,
                           seed=s.seed, controller=s.controller,
                           fidelity=s.fidelity, config_id=s.config_id)
    assert s2 == s


def test_trace_schema_valid(env):
    import json

    from coadapt.trace import validate_trace
    trace = env.run_episode(EpisodeConfig(seed=17, fidelity="fast"))
    rows = [json.loads(line) for line in trace.to_jsonl().splitlines()]
    validate_trace(rows)


def test_unreachable_goal_rejected(env):
    ec = EpisodeConfig(seed=1, x_start=np.array([0.35, 0.0, 0.25]),
                       x_goal=np.array([2.0, 0.0, 0.0]))
    with pytest.raises(ConfigInvalid):
        env.run_episode(ec)


def test_success_iff_final_error_within_goal(env):
    for seed in range(6):
        trace = env.run_episode(EpisodeConfig(seed=seed, fidelity="fast"))
        s = trace.summary
        assert s.success == (s.final_error <= s.epsilon_goal)


def test_transition_hook_sees_every_cycle(env):
    seen = []

    def hook(s, a_i, a_j, r, sn, term):
        seen.append((a_i, a_j, r, term))

    trace = env.run_episode(EpisodeConfig(seed=23, fidelity="fast"),
                            on_transition=hook)
    assert len(seen) == trace.summary.microstep_count
    assert seen[-1][3]   # last transition is terminal
    assert all(not t for *_, t in seen[:-1])
    rewards_in_trace = [r.reward["total"] for r in trace.records]
    np.testing.assert_allclose([s[2] for s in seen], rewards_in_trace)


def test_budget_termination(env):
    ec = EpisodeConfig(seed=29, fidelity="fast", max_microsteps=5)
    trace = env.run_episode(ec)
    assert trace.summary.microstep_count <= 5


def test_fixed_period_counts_budget(env):
    ec = EpisodeConfig(seed=29, controller="fixed_frequency", fidelity="fast",
                       max_microsteps=5)
    trace = env.run_episode(ec)
    assert trace.summary.microstep_count <= 5
    for rec in trace.records:
        assert rec.duration == pytest.approx(0.2)


def test_long_period_approaches_event_quality(clean_env):
    """A period comfortably above the worst-case execution time leaves no
    preemption: the baseline converges like the event-gated run."""
    kw = dict(seed=3, fidelity="fast", fixed_model=ModelIndex(1, 1),
              x_start=np.array([0.30, 0.05, 0.25]),
              x_goal=np.array([0.40, 0.05, 0.25]))
    slow_tick = clean_env.run_episode(
        EpisodeConfig(controller="fixed_frequency", fixed_period=2.0, **kw))
    gated = clean_env.run_episode(EpisodeConfig(**kw))
    assert slow_tick.summary.success and gated.summary.success
    assert slow_tick.summary.osc_count == gated.summary.osc_count == 0
    assert slow_tick.summary.final_error <= 0.01


def test_zero_training_episodes_emit_initial_checkpoint(env, tmp_path):
    out = env.run_training((0.2, 0.2, 0.005, 0.3, 20.0), episodes=0, seed=3,
                           out_dir=tmp_path)
    from coadapt.dqn import DualLearner, load_checkpoint
    nets = load_checkpoint(out["checkpoint"])
    fresh = DualLearner.create(np.random.default_rng([3, 0x1217]),
                               hidden=(64, 64))
    probe = np.random.default_rng(0).normal(size=22)
    assert np.array_equal(nets[0].forward(probe), fresh.net0.forward(probe))
