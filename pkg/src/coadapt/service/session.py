"""Live session state machine: one human driving one simulated episode.

The session advances in dynamic fidelity, equating simulated time with
wall-clock time (optionally scaled for tests). While awaiting a command
the robot holds still and the clock runs; an arriving command triggers one
decision cycle whose execution is paced out in wall time while snapshots
stream.
"""

from __future__ import annotations

import asyncio
import itertools
import time
import uuid
from dataclasses import dataclass, field

import numpy as np

from ..agents import ModelIndex, compose_step, robot_act
from ..dqn import make_state, reward_terms
from ..dynamics import execute_microstep
from ..env import Environment
from ..kinematics import JointState, forward_kinematics
from ..trace import CycleRecord, EpisodeTrace, recompute_summary
from ..trigger import TriggerState, count_oscillation
from .frames import (CommandFrame, EpisodeEndFrame, NoticeFrame,
                     SnapshotFrame)

_session_counter = itertools.count(1)


@dataclass
class SessionState:
    session_id: str
    mode: str = "awaiting_command"  # awaiting_command | executing | finished
    pending: CommandFrame | None = None
    seq: int = 0
    commands_seen: int = 0
    aborted: bool = False


class LiveSession:
    """Owns one episode driven by external commands."""

    def __init__(self, env: Environment, send, *, robot_policy="fixed",
                 agent1_net=None, seed: int = 0, time_scale: float = 1.0,
                 snapshot_hz: float = 25.0, reward_weights=None,
                 x_start=None, x_goal=None):
        self.env = env
        self.send = send              # async callable(frame dict)
        self.robot_policy = robot_policy
        self.agent1_net = agent1_net
        self.time_scale = float(time_scale)
        self.snapshot_hz = float(snapshot_hz)
        self.weights = tuple(reward_weights) if reward_weights is not None \
            else (1.0, 1.0, 0.01, 1.0, 100.0)
        self.state = SessionState(session_id=f"s{next(_session_counter):04d}-"
                                  f"{uuid.uuid4().hex[:6]}")
        self.rng = np.random.default_rng([seed, 0x11FE])
        x_s, x_g = env.sample_endpoints(self.rng)
        if x_start is not None:
            x_s = np.asarray(x_start, dtype=float)
        if x_goal is not None:
            x_g = np.asarray(x_goal, dtype=float)
        self.x_goal = x_g
        self.x_start = x_s
        q0 = env._solve_or_invalid(env.q_home, x_s, "start")
        self.joint_state = JointState.at_rest(q0)
        self.x = forward_kinematics(env.robot, q0)
        self.trig = TriggerState(subgoal=self.x.copy())
        self.sim_time = 0.0
        self.records: list[CycleRecord] = []
        self.model = ModelIndex(1, env.cfg["env"]["fixed_model_j"])
        self.trace: EpisodeTrace | None = None
        self._wait_started = None

    # -- command intake (single slot) --------------------------------------

    async def offer_command(self, cmd: CommandFrame) -> None:
        overwritten = self.state.pending is not None
        self.state.pending = cmd
        kind = "command_overwritten" if overwritten else "command_accepted"
        await self.send(NoticeFrame(kind=kind, command=cmd).model_dump())

    # -- snapshot ----------------------------------------------------------

    def _snapshot(self, epsilon: float) -> dict:
        self.state.seq += 1
        e = self.x_goal - self.x
        return SnapshotFrame(
            session_id=self.state.session_id, seq=self.state.seq,
            sim_time=self.sim_time,
            x=[float(v) for v in self.x],
            x_g=[float(v) for v in self.x_goal],
            e=[float(v) for v in e],
            subgoal=[float(v) for v in self.trig.subgoal],
            epsilon=epsilon, n_osc=int(self.trig.osc_count),
            mode=self.state.mode).model_dump()

    # -- main loop ----------------------------------------------------------

    async def run(self) -> EpisodeTrace:
        """Advance until task completion, budget exhaustion, or abort."""
        env = self.env
        cfg = env.cfg["env"]
        max_time = float(cfg["max_wall_time"])
        max_steps = int(cfg["max_microsteps"])
        snap_dt = 1.0 / self.snapshot_hz
        epsilon_current = env.trigger_cfg.epsilon_big
        try:
            await self.send(self._snapshot(epsilon_current))
            while True:
                if env._task_done(self.x, self.x_goal, self.joint_state):
                    break
                if self.sim_time >= max_time or len(self.records) >= max_steps:
                    break
                if self.state.pending is None:
                    self.state.mode = "awaiting_command"
                    if self._wait_started is None:
                        self._wait_started = time.monotonic()
                    await asyncio.sleep(snap_dt / self.time_scale)
                    self.sim_time += snap_dt
                    await self.send(self._snapshot(epsilon_current))
                    continue
                cmd = self.state.pending
                self.state.pending = None
                waited = 0.0
                if self._wait_started is not None:
                    waited = (time.monotonic() - self._wait_started) \
                        * self.time_scale
                    self._wait_started = None
                self.state.mode = "executing"
                epsilon_current = await self._execute_cycle(cmd, waited)
            self.state.mode = "finished"
        except asyncio.CancelledError:
            self.state.aborted = True
        finally:
            summary = recompute_summary(
                self.records, self.x_goal, self.x_start,
                env.trigger_cfg.epsilon_goal, seed=None, controller="live",
                fidelity="dynamic", config_id="session")
            summary.aborted = self.state.aborted
            self.trace = EpisodeTrace(records=self.records, summary=summary)
        if not self.state.aborted:
            await self.send(EpisodeEndFrame(
                session_id=self.state.session_id,
                summary=self.trace.summary.to_dict()).model_dump())
        return self.trace

    async def _execute_cycle(self, cmd: CommandFrame, decision_time: float):
        env = self.env
        u_h = int(cmd.direction)
        a_i = 1 if cmd.radius_choice == "big" else 2
        epsilon = (env.trigger_cfg.epsilon_big if a_i == 1
                   else env.trigger_cfg.epsilon_small)
        x_meas = env._measure(self.x, self.rng)
        err_meas = self.x_goal - x_meas
        a_j = self._select_magnitudes(x_meas, a_i)
        deltas = robot_act(env.magnitudes, a_j)
        delta_x = compose_step(u_h, deltas, err_meas, env.primary_axis,
                               env.trigger_cfg.sign_dead_zone)
        waypoint = x_meas + delta_x
        dist_before = float(np.linalg.norm(err_meas))

        self.trig = self.trig.retarget(waypoint)
        self.trig = count_oscillation(self.trig, waypoint - self.x, epsilon,
                                      env.trigger_cfg.sign_dead_zone)
        osc_before = self.trig.osc_count
        q_target, ik_failed = env._ik_step(self.joint_state.q, waypoint)
        res = execute_microstep(env.robot, self.joint_state, q_target,
                                "dynamic", dt=env.dt, gains=env.gains,
                                floor=env.min_step_duration)
        # pace the execution out in wall time, streaming snapshots
        stride = max(int(round((1.0 / self.snapshot_hz) / env.dt)), 1)
        fired = False
        for k0 in range(0, res.x_traj.shape[0] - 1, stride):
            k1 = min(k0 + stride, res.x_traj.shape[0] - 1)
            fired, self.trig = env._gate_and_count(
                self.trig, res.x_traj[k0:k1 + 1], epsilon, fired)
            self.x = res.x_traj[k1].copy()
            self.sim_time += (k1 - k0) * env.dt
            await self.send(self._snapshot(epsilon))
            await asyncio.sleep((k1 - k0) * env.dt / self.time_scale)
        self.joint_state = JointState(res.q_final, res.qdot_final)
        self.x = forward_kinematics(env.robot, res.q_final)

        err_new = self.x_goal - self.x
        success = env._task_done(self.x, self.x_goal, self.joint_state)
        osc_cycle = self.trig.osc_count - osc_before
        t_step = decision_time + res.duration
        self.sim_time += decision_time
        rterms = reward_terms(err_new, t_step, res.effort, osc_cycle,
                              success, self.weights)
        self.records.append(CycleRecord(
            m=self.trig.subgoal_index, sim_time=self.sim_time,
            x=[float(v) for v in self.x],
            q=[float(v) for v in self.joint_state.q],
            subgoal=[float(v) for v in waypoint],
            command={"u_h": u_h, "epsilon": float(epsilon),
                     "deltas": [float(d) for d in deltas],
                     "delta_x": [float(v) for v in delta_x],
                     "decision_time": float(decision_time)},
            fired=bool(fired), held=bool(not fired), ik_failed=bool(ik_failed),
            action_i=a_i, action_j=int(a_j), duration=float(res.duration),
            effort=float(res.effort), jerk=float(res.jerk_integral),
            n_osc_cum=int(self.trig.osc_count),
            dist_to_goal_before=dist_before, reward=rterms))
        self.state.commands_seen += 1
        self.model = ModelIndex(a_i, a_j)
        return epsilon

    def _select_magnitudes(self, x_meas, a_i: int) -> int:
        if self.robot_policy == "dammrl" and self.agent1_net is not None:
            state = make_state(x_meas, self.x_goal, self.model,
                               self.env.lo, self.env.hi)
            obs1 = np.concatenate([state.vector(), [float(a_i - 1)]])
            return int(np.argmax(self.agent1_net.forward(obs1))) + 1
        return int(self.env.cfg["env"]["fixed_model_j"])
