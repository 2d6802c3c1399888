"""Seedable reaching episodes wiring agents, IK, execution, and the gate.

Three controllers:

* ``event_fixed_model``: admission-sphere progression with a fixed (i, j).
* ``dammrl``: admission-sphere progression with learned (i, j) selection.
* ``fixed_frequency``: a timer issues commands at a constant period and
  retargets the controller mid-execution, ignoring proximity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dqn
from .agents import (HumanProfile, ModelIndex, StepMagnitudes, compose_step,
                     human_decide, robot_act)
from .config import load_config
from .dynamics import (execute_hold, execute_microstep, jerk_squared_integral,
                       _quintic_coeffs, _sample_interpolant, _track_reference,
                       step_duration)
from .dqn import DualLearner, RlState, make_state, reward_terms
from .errors import ConfigInvalid, IkNoConvergence
from .kinematics import (JointState, RobotModel, forward_kinematics, ik_solve,
                         jacobian)
from .trace import CycleRecord, EpisodeTrace, recompute_summary
from .trigger import TriggerConfig, TriggerState, check_trigger, count_oscillation

CONTROLLERS = ("fixed_frequency", "event_fixed_model", "dammrl")
DEFAULT_REWARD_WEIGHTS = (0.2, 0.25, 0.005, 0.15, 20.0)


@dataclass(frozen=True)
class EpisodeConfig:
    """Everything one episode needs beyond the shared models."""

    seed: int
    controller: str = "event_fixed_model"
    fidelity: str = "fast"
    fixed_period: float = 0.2
    max_wall_time: float = 60.0
    max_microsteps: int = 200
    reward_weights: tuple = DEFAULT_REWARD_WEIGHTS
    fixed_model: ModelIndex = ModelIndex(1, 2)
    x_start: np.ndarray | None = None
    x_goal: np.ndarray | None = None
    config_id: str = ""

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ConfigInvalid(f"unknown controller {self.controller!r}")
        if self.fidelity not in ("fast", "dynamic"):
            raise ConfigInvalid(f"unknown fidelity {self.fidelity!r}")
        if self.max_wall_time <= 0 or self.max_microsteps <= 0:
            raise ConfigInvalid("episode budgets must be positive")
        if self.fixed_period <= 0:
            raise ConfigInvalid("fixed_period must be positive")


class FixedModelPolicy:
    """Always the same (i, j) cell."""

    def __init__(self, model: ModelIndex):
        self.model = model

    def select(self, state: RlState, rng) -> tuple[int, int]:
        return self.model.i, self.model.j


class GreedyPolicy:
    """Exploit trained nets (epsilon-greedy with fixed epsilon)."""

    def __init__(self, learner: DualLearner, epsilon: float = 0.0):
        self.learner = learner
        self.epsilon = epsilon

    def select(self, state: RlState, rng) -> tuple[int, int]:
        return self.learner.select_actions(state, self.epsilon, rng)


class SchedulePolicy:
    """Epsilon-greedy following the learner's decay schedule."""

    def __init__(self, learner: DualLearner):
        self.learner = learner

    def select(self, state: RlState, rng) -> tuple[int, int]:
        return self.learner.select_actions(state, self.learner.epsilon(), rng)


class Environment:
    """Shared models plus episode loops."""

    def __init__(self, cfg: dict | None = None):
        self.cfg = cfg if cfg is not None else load_config()
        self.robot = RobotModel.from_config(self.cfg["robot"])
        self.trigger_cfg = TriggerConfig.from_config(self.cfg["trigger"])
        self.magnitudes = StepMagnitudes.from_config(self.cfg["agents"]["magnitudes"])
        self.human = HumanProfile.from_config(self.cfg["agents"]["human"])
        self.primary_axis = int(self.cfg["agents"]["primary_axis"])
        env = self.cfg["env"]
        self.lo = np.asarray(env["workspace_lo"], dtype=float)
        self.hi = np.asarray(env["workspace_hi"], dtype=float)
        self.min_separation = float(env["min_separation"])
        self.dt = float(env["dt"])
        self.gains = (float(env["ctc_kp"]), float(env["ctc_kd"]))
        self.min_step_duration = float(env["min_step_duration"])
        self.ik_tol = float(env["ik_tol"])
        self.ik_damping = float(env["ik_damping"])
        self.ik_max_iters = int(env["ik_max_iters"])
        self.hold_timeout = float(env["hold_timeout"])
        self.sensor_noise = float(env["sensor_noise"])
        self.settle_speed = float(env["settle_speed"])
        self.q_home = np.asarray(env["q_home"], dtype=float)

    def _measure(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Position as the agents perceive it (additive sensing noise)."""
        if self.sensor_noise <= 0:
            return x
        return x + rng.normal(0.0, self.sensor_noise, 3)

    def _task_done(self, x: np.ndarray, x_goal: np.ndarray,
                   state: JointState) -> bool:
        """Reached: inside the goal tolerance while essentially at rest.

        The settle-speed qualifier keeps a trajectory that merely sweeps
        through the goal ball from counting as task completion.
        """
        if float(np.linalg.norm(x_goal - x)) > self.trigger_cfg.epsilon_goal:
            return False
        tip_speed = float(np.linalg.norm(
            jacobian(self.robot, state.q) @ state.qdot))
        return tip_speed <= self.settle_speed

    # -- episode setup ----------------------------------------------------

    def sample_endpoints(self, rng: np.random.Generator):
        """Start and goal uniform in the workspace box, separated enough."""
        while True:
            x_s = rng.uniform(self.lo, self.hi)
            x_g = rng.uniform(self.lo, self.hi)
            if np.linalg.norm(x_g - x_s) >= self.min_separation:
                return x_s, x_g

    def _solve_or_invalid(self, seed_q, target, what: str):
        """Setup-time IK with deterministic multi-seed retries; a long
        first reach can jam damped least squares at a joint limit, which
        says nothing about reachability."""
        seeds = [np.asarray(seed_q, dtype=float), self.q_home,
                 self.q_home + 0.4, self.q_home - 0.4, np.zeros(6)]
        last_exc = None
        for s in seeds:
            try:
                return ik_solve(self.robot, self.robot.clamp(s), target,
                                tol=self.ik_tol, damping=self.ik_damping,
                                max_iters=self.ik_max_iters)
            except IkNoConvergence as exc:
                last_exc = exc
        raise ConfigInvalid(
            f"{what} {target} is unreachable: {last_exc}") from last_exc

    def _episode_setup(self, ec: EpisodeConfig):
        rng = np.random.default_rng([ec.seed, 0x0C0ADA])
        if ec.x_start is None or ec.x_goal is None:
            x_s, x_g = self.sample_endpoints(rng)
            if ec.x_start is not None:
                x_s = np.asarray(ec.x_start, dtype=float)
            if ec.x_goal is not None:
                x_g = np.asarray(ec.x_goal, dtype=float)
        else:
            x_s = np.asarray(ec.x_start, dtype=float)
            x_g = np.asarray(ec.x_goal, dtype=float)
        if np.linalg.norm(x_g) > self.robot.max_reach():
            raise ConfigInvalid(f"goal {x_g} lies outside the reachable radius")
        q0 = self._solve_or_invalid(self.q_home, x_s, "start")
        self._solve_or_invalid(q0, x_g, "goal")
        return rng, x_s, x_g, q0

    # -- shared cycle pieces ----------------------------------------------

    def _ik_step(self, q, waypoint):
        try:
            return ik_solve(self.robot, q, waypoint, tol=self.ik_tol,
                            damping=self.ik_damping,
                            max_iters=self.ik_max_iters), False
        except IkNoConvergence:
            return q.copy(), True

    def _gate_and_count(self, trig: TriggerState, x_traj, epsilon,
                        fired_already: bool):
        """Process execution samples: oscillation counting and the gate."""
        fired = fired_already
        for k in range(1, x_traj.shape[0]):
            xk = x_traj[k]
            trig = count_oscillation(trig, trig.subgoal - xk, epsilon,
                                     self.trigger_cfg.sign_dead_zone)
            if not fired:
                fired, trig = check_trigger(trig, xk, epsilon, self.trigger_cfg.W)
        return fired, trig

    # -- event-gated episode ----------------------------------------------

    def run_episode(self, ec: EpisodeConfig, policy=None, on_transition=None,
                    initial_model: ModelIndex | None = None) -> EpisodeTrace:
        """Run one event-gated reaching episode.

        ``policy`` picks (i, j) per cycle; defaults to the fixed model.
        ``on_transition`` receives (state, a_i, a_j, reward, next_state,
        terminal) after every cycle.
        """
        if ec.controller == "fixed_frequency":
            return self.run_fixed_frequency(ec, policy, on_transition)
        if policy is None:
            policy = FixedModelPolicy(ec.fixed_model)
        rng, x_s, x_g, q = self._episode_setup(ec)
        eps_goal = self.trigger_cfg.epsilon_goal
        state = JointState.at_rest(q)
        x = forward_kinematics(self.robot, q)
        model = initial_model if initial_model is not None else ec.fixed_model
        trig = TriggerState(subgoal=x.copy())
        records: list[CycleRecord] = []
        sim_time = 0.0

        while True:
            if self._task_done(x, x_g, state):
                break
            if sim_time >= ec.max_wall_time or len(records) >= ec.max_microsteps:
                break
            x_meas = self._measure(x, rng)
            err_meas = x_g - x_meas
            rl_state = make_state(x_meas, x_g, model, self.lo, self.hi)
            a_i, a_j = policy.select(rl_state, rng)
            u_h, epsilon, t_dec = human_decide(
                self.human, err_meas, a_i, rng, self.trigger_cfg,
                self.primary_axis)
            deltas = robot_act(self.magnitudes, a_j)
            delta_x = compose_step(u_h, deltas, err_meas, self.primary_axis,
                                   self.trigger_cfg.sign_dead_zone)
            waypoint = x_meas + delta_x
            dist_before = float(np.linalg.norm(err_meas))
            sim_time += t_dec

            trig = trig.retarget(waypoint)
            trig = count_oscillation(trig, waypoint - x, epsilon,
                                     self.trigger_cfg.sign_dead_zone)
            osc_before = trig.osc_count
            q_target, ik_failed = self._ik_step(state.q, waypoint)

            res = execute_microstep(self.robot, state, q_target, ec.fidelity,
                                    dt=self.dt, gains=self.gains,
                                    floor=self.min_step_duration)
            cycle_duration = res.duration
            cycle_effort = res.effort
            cycle_jerk = res.jerk_integral
            state = JointState(res.q_final, res.qdot_final)

            if ec.fidelity == "dynamic":
                fired, trig = self._gate_and_count(trig, res.x_traj, epsilon, False)
                hold_left = self.hold_timeout
                while not fired and hold_left > 1e-9:
                    chunk = min(0.1, hold_left)
                    hres = execute_hold(self.robot, state, q_target, chunk,
                                        dt=self.dt, gains=self.gains)
                    fired, trig = self._gate_and_count(trig, hres.x_traj,
                                                       epsilon, False)
                    state = JointState(hres.q_final, hres.qdot_final)
                    cycle_duration += hres.duration
                    cycle_effort += hres.effort
                    cycle_jerk += hres.jerk_integral
                    hold_left -= chunk
                held = not fired
                x = forward_kinematics(self.robot, state.q)
            else:
                x = res.x_traj[-1]
                fired, trig = check_trigger(trig, x, epsilon, self.trigger_cfg.W)
                held = not fired
            sim_time += cycle_duration

            err_new = x_g - x
            success = self._task_done(x, x_g, state)
            osc_cycle = trig.osc_count - osc_before
            t_step = t_dec + cycle_duration
            rterms = reward_terms(err_new, t_step, cycle_effort, osc_cycle,
                                  success, ec.reward_weights)
            next_model = ModelIndex(a_i, a_j)
            terminal = (success or sim_time >= ec.max_wall_time
                        or len(records) + 1 >= ec.max_microsteps)
            if on_transition is not None:
                next_state = make_state(x, x_g, next_model, self.lo, self.hi)
                on_transition(rl_state, a_i, a_j, rterms["total"], next_state,
                              terminal)
            records.append(CycleRecord(
                m=trig.subgoal_index, sim_time=sim_time,
                x=[float(v) for v in x], q=[float(v) for v in state.q],
                subgoal=[float(v) for v in waypoint],
                command={"u_h": int(u_h), "epsilon": float(epsilon),
                         "deltas": [float(d) for d in deltas],
                         "delta_x": [float(v) for v in delta_x],
                         "decision_time": float(t_dec)},
                fired=bool(fired), held=bool(held), ik_failed=bool(ik_failed),
                action_i=int(a_i), action_j=int(a_j),
                duration=float(cycle_duration), effort=float(cycle_effort),
                jerk=float(cycle_jerk), n_osc_cum=int(trig.osc_count),
                dist_to_goal_before=dist_before, reward=rterms,
            ))
            model = next_model

        summary = recompute_summary(
            records, x_g, x_s, eps_goal, seed=ec.seed, controller=ec.controller,
            fidelity=ec.fidelity, config_id=ec.config_id)
        return EpisodeTrace(records=records, summary=summary)

    # -- fixed-frequency baseline -----------------------------------------

    def run_fixed_frequency(self, ec: EpisodeConfig, policy=None,
                            on_transition=None) -> EpisodeTrace:
        """Timer-driven baseline: a new command every fixed_period seconds,
        retargeting the controller immediately even mid-execution and
        ignoring proximity. The timer does not wait for the human: the
        latest directional decision is reused until the human's next one
        matures (one per decision time), so commands can act on stale
        intent."""
        if policy is None:
            policy = FixedModelPolicy(ec.fixed_model)
        rng, x_s, x_g, q = self._episode_setup(ec)
        eps_goal = self.trigger_cfg.epsilon_goal
        state = JointState.at_rest(q)
        x = forward_kinematics(self.robot, q)
        model = ec.fixed_model
        trig = TriggerState(subgoal=x.copy())
        records: list[CycleRecord] = []
        sim_time = 0.0
        period_steps = max(int(round(ec.fixed_period / self.dt)), 1)
        next_decision = 0.0
        u_h, epsilon, t_dec = None, None, None

        while True:
            if self._task_done(x, x_g, state):
                break
            if sim_time >= ec.max_wall_time or len(records) >= ec.max_microsteps:
                break
            x_meas = self._measure(x, rng)
            err_meas = x_g - x_meas
            rl_state = make_state(x_meas, x_g, model, self.lo, self.hi)
            a_i, a_j = policy.select(rl_state, rng)
            if u_h is None or sim_time >= next_decision:
                u_h, epsilon, t_dec = human_decide(
                    self.human, err_meas, a_i, rng, self.trigger_cfg,
                    self.primary_axis)
                next_decision = sim_time + t_dec
            deltas = robot_act(self.magnitudes, a_j)
            delta_x = compose_step(u_h, deltas, err_meas, self.primary_axis,
                                   self.trigger_cfg.sign_dead_zone)
            waypoint = x_meas + delta_x
            dist_before = float(np.linalg.norm(err_meas))

            trig = trig.retarget(waypoint)
            trig = count_oscillation(trig, waypoint - x, epsilon,
                                     self.trigger_cfg.sign_dead_zone)
            osc_before = trig.osc_count
            q_target, ik_failed = self._ik_step(state.q, waypoint)
            dq = q_target - state.q
            ref_duration, _ = step_duration(self.robot, dq, self.dt,
                                            self.min_step_duration)

            if ec.fidelity == "dynamic":
                kp = np.full(6, self.gains[0])
                kd = np.full(6, self.gains[1])
                q_traj, x_traj, qd_final, effort = _track_reference(
                    self.robot.dh, self.robot.link_masses, self.robot.link_coms,
                    self.robot.gravity, kp, kd, state.q, state.qdot,
                    state.q, dq, ref_duration, period_steps, self.dt)
                state = JointState(q_traj[-1], qd_final)
            else:
                q_traj, x_traj = _sample_interpolant(
                    self.robot.dh, state.q, dq, ref_duration, period_steps,
                    self.dt)
                effort = float(np.sum(np.abs(q_traj[-1] - q_traj[0])))
                t_end = period_steps * self.dt
                if t_end < ref_duration:
                    _, sv, _ = _quintic_coeffs(t_end, ref_duration)
                    qd_end = dq * sv
                else:
                    qd_end = np.zeros(6)
                state = JointState(q_traj[-1], qd_end)
            _, trig = self._gate_and_count(trig, x_traj, epsilon, True)
            cycle_jerk = jerk_squared_integral(x_traj, self.dt)
            x = x_traj[-1].copy()
            sim_time += ec.fixed_period

            err_new = x_g - x
            success = self._task_done(x, x_g, state)
            osc_cycle = trig.osc_count - osc_before
            rterms = reward_terms(err_new, ec.fixed_period, effort, osc_cycle,
                                  success, ec.reward_weights)
            terminal = (success or sim_time >= ec.max_wall_time
                        or len(records) + 1 >= ec.max_microsteps)
            if on_transition is not None:
                next_state = make_state(x, x_g, ModelIndex(a_i, a_j),
                                        self.lo, self.hi)
                on_transition(rl_state, a_i, a_j, rterms["total"], next_state,
                              terminal)
            records.append(CycleRecord(
                m=0, sim_time=sim_time,
                x=[float(v) for v in x], q=[float(v) for v in state.q],
                subgoal=[float(v) for v in waypoint],
                command={"u_h": int(u_h), "epsilon": float(epsilon),
                         "deltas": [float(d) for d in deltas],
                         "delta_x": [float(v) for v in delta_x],
                         "decision_time": 0.0},
                fired=False, held=False, ik_failed=bool(ik_failed),
                action_i=int(a_i), action_j=int(a_j),
                duration=float(ec.fixed_period), effort=float(effort),
                jerk=float(cycle_jerk), n_osc_cum=int(trig.osc_count),
                dist_to_goal_before=dist_before, reward=rterms,
            ))

        summary = recompute_summary(
            records, x_g, x_s, eps_goal, seed=ec.seed, controller=ec.controller,
            fidelity=ec.fidelity, config_id=ec.config_id)
        return EpisodeTrace(records=records, summary=summary)

    # -- training ----------------------------------------------------------

    def run_training(self, reward_weights, episodes: int, seed: int,
                     out_dir, fidelity: str = "fast",
                     progress=None) -> dict:
        """Train the dual learner; writes metrics CSVs plus checkpoints.

        Returns paths and the evaluation history. Zero episodes still emit
        the initial checkpoint.
        """
        out = Path(out_dir)
        (out / "checkpoints").mkdir(parents=True, exist_ok=True)
        lc = self.cfg["learner"]
        rng_init = np.random.default_rng([seed, 0x1217])
        learner = DualLearner.create(
            rng_init, hidden=tuple(lc["hidden_sizes"]),
            buffer_capacity=lc["buffer_capacity"], lr=lc["learning_rate"],
            batch_size=lc["batch_size"], discount=lc["discount"],
            target_sync_period=lc["target_sync_period"],
            epsilon_start=lc["epsilon_start"], epsilon_final=lc["epsilon_final"],
            epsilon_decay_steps=lc["epsilon_decay_steps"])
        train_rng = np.random.default_rng([seed, 0x7EA1])
        weights = tuple(reward_weights)
        metrics_path = out / "training_metrics.csv"
        eval_path = out / "eval_metrics.csv"
        eval_rows = []
        final_ckpt = out / "checkpoints" / "final.damm"

        with metrics_path.open("w", newline="") as mf, \
                eval_path.open("w", newline="") as ef:
            mwriter = csv.writer(mf)
            mwriter.writerow(["episode", "mean_reward", "td_loss0",
                              "td_loss1", "epsilon_greedy"])
            ewriter = csv.writer(ef)
            ewriter.writerow(["episode", "eval_return", "eval_return_disc",
                              "eval_time", "eval_error", "eval_success"])

            def evaluate(ep_index):
                row = evaluate_policy(self, learner, weights, fidelity,
                                      lc["eval_episodes"], seed)
                eval_rows.append((ep_index, *row))
                ewriter.writerow([ep_index, *row])
                ef.flush()

            evaluate(0)
            for ep in range(episodes):
                losses = []
                rewards = []

                def hook(s, a_i, a_j, r, sn, term):
                    learner.buffer.push(s, a_i, a_j, r, sn, term)
                    learner.env_steps += 1
                    out_losses = learner.train_step(train_rng)
                    if out_losses is not None:
                        losses.append(out_losses)
                    rewards.append(r)

                ec = EpisodeConfig(seed=int(1_000_000 + ep), controller="dammrl",
                                   fidelity=fidelity, reward_weights=weights)
                self.run_episode(ec, SchedulePolicy(learner), on_transition=hook)
                mean_r = float(np.mean(rewards)) if rewards else 0.0
                l0, l1 = (float(np.mean([l[0] for l in losses])),
                          float(np.mean([l[1] for l in losses]))) if losses else (0.0, 0.0)
                mwriter.writerow([ep + 1, mean_r, l0, l1, learner.epsilon()])
                if (ep + 1) % lc["eval_every"] == 0:
                    evaluate(ep + 1)
                if (ep + 1) % lc["checkpoint_every"] == 0:
                    dqn.save_checkpoint(
                        out / "checkpoints" / f"ep{ep + 1:06d}.damm",
                        [learner.net0, learner.net1])
                if progress is not None:
                    progress(ep + 1, episodes)
            if episodes % lc["eval_every"] != 0 or episodes == 0:
                evaluate(episodes)
        dqn.save_checkpoint(final_ckpt, [learner.net0, learner.net1])
        return {"checkpoint": str(final_ckpt), "metrics": str(metrics_path),
                "eval_metrics": str(eval_path), "eval_rows": eval_rows,
                "learner": learner}


def evaluate_policy(env: Environment, learner: DualLearner, weights,
                    fidelity: str, episodes: int, seed: int):
    """Greedy evaluation episodes on a fixed seed block; returns means.

    Reports both the undiscounted and the discounted episode return; the
    discounted one is the quantity the agents optimize.
    """
    returns, disc_returns, times, errors, succ = [], [], [], [], []
    gamma = learner.discount
    for k in range(episodes):
        ec = EpisodeConfig(seed=int(9_000_000 + seed * 1000 + k),
                           controller="dammrl", fidelity=fidelity,
                           reward_weights=tuple(weights))
        trace = env.run_episode(ec, GreedyPolicy(learner))
        rs = [rec.reward["total"] for rec in trace.records]
        returns.append(sum(rs))
        disc_returns.append(sum(r * gamma ** i for i, r in enumerate(rs)))
        times.append(trace.summary.total_time)
        errors.append(trace.summary.final_error)
        succ.append(1.0 if trace.summary.success else 0.0)
    return (float(np.mean(returns)), float(np.mean(disc_returns)),
            float(np.mean(times)), float(np.mean(errors)),
            float(np.mean(succ)))
