"""Rigid-body dynamics and micro-step execution.

Inverse dynamics is recursive Newton-Euler over the chain with point-mass
links. Micro-steps follow a quintic joint-space reference; in dynamic
fidelity the reference is tracked by a computed-torque law on integrated
dynamics, in fast fidelity the interpolant is taken as exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .kinematics import N_JOINTS, JointState, RobotModel, _chain_frames, _fk_position

DT_DEFAULT = 1e-3
MIN_STEP_DURATION = 0.05


@dataclass
class DynamicsTerms:
    """Inertia matrix, Coriolis/centrifugal torques, and gravity torques."""

    M: np.ndarray      # (6, 6)
    Cqdot: np.ndarray  # (6,)
    g: np.ndarray      # (6,)


@dataclass
class ExecutionResult:
    """Outcome of one executed micro-step."""

    q_final: np.ndarray
    qdot_final: np.ndarray
    duration: float
    times: np.ndarray       # (n+1,)
    q_traj: np.ndarray      # (n+1, 6)
    x_traj: np.ndarray      # (n+1, 3)
    effort: float
    jerk_integral: float


@njit(cache=True)
def _rne_frames(origins, zaxes, rots, masses, coms, gravity, qdot, qddot):
    """Newton-Euler pass over precomputed chain frames."""
    n = masses.shape[0]
    w = np.zeros(3)
    wd = np.zeros(3)
    a = np.zeros(3)
    acc_com = np.zeros((n, 3))
    p_com = np.zeros((n, 3))
    for k in range(n):
        z = zaxes[k]
        wq = qdot[k] * z
        wd = wd + qddot[k] * z + np.cross(w, wq)
        w = w + wq
        r = origins[k + 1] - origins[k]
        a = a + np.cross(wd, r) + np.cross(w, np.cross(w, r))
        rc = rots[k + 1] @ coms[k]
        p_com[k] = origins[k + 1] + rc
        acc_com[k] = a + np.cross(wd, rc) + np.cross(w, np.cross(w, rc))

    tau = np.zeros(n)
    f = np.zeros(3)
    moment = np.zeros(3)
    for k in range(n - 1, -1, -1):
        fk = masses[k] * (acc_com[k] - gravity)
        moment = moment + np.cross(origins[k + 1] - origins[k], f)
        moment = moment + np.cross(p_com[k] - origins[k], fk)
        f = f + fk
        tau[k] = zaxes[k, 0] * moment[0] + zaxes[k, 1] * moment[1] \
            + zaxes[k, 2] * moment[2]
    return tau


@njit(cache=True)
def _rne(dh, masses, coms, gravity, q, qdot, qddot):
    """Joint torques for point-mass links, computed in the base frame."""
    n = dh.shape[0]
    origins, zaxes, rots = _chain_frames(dh, q)

    w = np.zeros(3)
    wd = np.zeros(3)
    a = np.zeros(3)
    acc_com = np.zeros((n, 3))
    p_com = np.zeros((n, 3))
    for k in range(n):
        z = zaxes[k]
        wq = qdot[k] * z
        # angular terms of link k (driven by joint k about z_{k-1})
        wd = wd + qddot[k] * z + np.cross(w, wq)
        w = w + wq
        r = origins[k + 1] - origins[k]
        a = a + np.cross(wd, r) + np.cross(w, np.cross(w, r))
        rc = rots[k + 1] @ coms[k]
        p_com[k] = origins[k + 1] + rc
        acc_com[k] = a + np.cross(wd, rc) + np.cross(w, np.cross(w, rc))

    tau = np.zeros(n)
    f = np.zeros(3)
    moment = np.zeros(3)
    for k in range(n - 1, -1, -1):
        fk = masses[k] * (acc_com[k] - gravity)
        # shift outboard moment from origin k+1 to origin k
        moment = moment + np.cross(origins[k + 1] - origins[k], f)
        moment = moment + np.cross(p_com[k] - origins[k], fk)
        f = f + fk
        tau[k] = zaxes[k, 0] * moment[0] + zaxes[k, 1] * moment[1] \
            + zaxes[k, 2] * moment[2]
    return tau


@njit(cache=True)
def _terms(dh, masses, coms, gravity, q, qdot):
    """Assemble M, C*qdot, g from inverse-dynamics probes.

    The chain frames are shared across all probe passes.
    """
    n = dh.shape[0]
    origins, zaxes, rots = _chain_frames(dh, q)
    zero = np.zeros(n)
    g = _rne_frames(origins, zaxes, rots, masses, coms, gravity, zero, zero)
    cqd = _rne_frames(origins, zaxes, rots, masses, coms, gravity, qdot, zero) - g
    M = np.empty((n, n))
    ek = np.zeros(n)
    for k in range(n):
        ek[k] = 1.0
        M[:, k] = _rne_frames(origins, zaxes, rots, masses, coms, gravity,
                              zero, ek) - g
        ek[k] = 0.0
    return M, cqd, g


@njit(cache=True)
def _terms_with_tip(dh, masses, coms, gravity, q, qdot):
    """Like _terms but also returns the end-effector position."""
    n = dh.shape[0]
    origins, zaxes, rots = _chain_frames(dh, q)
    zero = np.zeros(n)
    g = _rne_frames(origins, zaxes, rots, masses, coms, gravity, zero, zero)
    cqd = _rne_frames(origins, zaxes, rots, masses, coms, gravity, qdot, zero) - g
    M = np.empty((n, n))
    ek = np.zeros(n)
    for k in range(n):
        ek[k] = 1.0
        M[:, k] = _rne_frames(origins, zaxes, rots, masses, coms, gravity,
                              zero, ek) - g
        ek[k] = 0.0
    return M, cqd, g, origins[n]


@njit(cache=True)
def _quintic_coeffs(t, duration):
    s = t / duration
    s2 = s * s
    s3 = s2 * s
    pos = 10.0 * s3 - 15.0 * s3 * s + 6.0 * s3 * s2
    vel = (30.0 * s2 - 60.0 * s3 + 30.0 * s2 * s2) / duration
    acc = (60.0 * s - 180.0 * s2 + 120.0 * s3) / (duration * duration)
    return pos, vel, acc


@njit(cache=True)
def _track_reference(dh, masses, coms, gravity, kp, kd,
                     q_init, qd_init, ref_q0, ref_dq, ref_duration,
                     n_steps, dt):
    """Integrate the dynamics under computed-torque tracking of a quintic.

    The reference runs from ref_q0 to ref_q0 + ref_dq over ref_duration and
    holds the end point afterwards. Semi-implicit Euler at dt. Returns the
    joint trajectory, tip trajectory, final velocity, and integrated |tau|_1.
    """
    n = dh.shape[0]
    q = q_init.copy()
    qd = qd_init.copy()
    q_traj = np.empty((n_steps + 1, n))
    x_traj = np.empty((n_steps + 1, 3))
    q_traj[0] = q
    effort = 0.0
    for k in range(n_steps):
        t = k * dt
        if t < ref_duration:
            sp, sv, sa = _quintic_coeffs(t, ref_duration)
        else:
            sp, sv, sa = 1.0, 0.0, 0.0
        M, cqd, g, tip = _terms_with_tip(dh, masses, coms, gravity, q, qd)
        x_traj[k] = tip
        tau = np.empty(n)
        for i in range(n):
            q_ref = ref_q0[i] + ref_dq[i] * sp
            qd_ref = ref_dq[i] * sv
            qdd_ref = ref_dq[i] * sa
            tau[i] = qdd_ref + kd[i] * (qd_ref - qd[i]) + kp[i] * (q_ref - q[i])
        tau = M @ tau + cqd + g
        qdd = np.linalg.solve(M, tau - cqd - g)
        for i in range(n):
            effort += abs(tau[i]) * dt
            qd[i] = qd[i] + dt * qdd[i]
            q[i] = q[i] + dt * qd[i]
        q_traj[k + 1] = q
    x_traj[n_steps] = _fk_position(dh, q)
    return q_traj, x_traj, qd, effort


@njit(cache=True)
def _sample_interpolant(dh, q0, dq, duration, n_steps, dt):
    n = dh.shape[0]
    q_traj = np.empty((n_steps + 1, n))
    x_traj = np.empty((n_steps + 1, 3))
    for k in range(n_steps + 1):
        t = k * dt
        if t < duration:
            sp, _, _ = _quintic_coeffs(t, duration)
        else:
            sp = 1.0
        q_traj[k] = q0 + dq * sp
        x_traj[k] = _fk_position(dh, q_traj[k])
    return q_traj, x_traj


@njit(cache=True)
def _simulate_passive(dh, masses, coms, gravity, q_init, qd_init, n_steps, dt):
    """Free motion under gravity with zero applied torque."""
    n = dh.shape[0]
    q = q_init.copy()
    qd = qd_init.copy()
    q_traj = np.empty((n_steps + 1, n))
    qd_traj = np.empty((n_steps + 1, n))
    q_traj[0] = q
    qd_traj[0] = qd
    for k in range(n_steps):
        M, cqd, g = _terms(dh, masses, coms, gravity, q, qd)
        qdd = np.linalg.solve(M, -cqd - g)
        qd = qd + dt * qdd
        q = q + dt * qd
        q_traj[k + 1] = q
        qd_traj[k + 1] = qd
    return q_traj, qd_traj


def inverse_dynamics(model: RobotModel, q, qdot, qddot) -> np.ndarray:
    """Joint torques realizing qddot at (q, qdot), gravity included."""
    return _rne(model.dh, model.link_masses, model.link_coms, model.gravity,
                np.asarray(q, dtype=float), np.asarray(qdot, dtype=float),
                np.asarray(qddot, dtype=float))


def extract_terms(model: RobotModel, q, qdot) -> DynamicsTerms:
    """M, C*qdot, g at (q, qdot) assembled from inverse-dynamics probes."""
    M, cqd, g = _terms(model.dh, model.link_masses, model.link_coms,
                       model.gravity, np.asarray(q, dtype=float),
                       np.asarray(qdot, dtype=float))
    return DynamicsTerms(M=M, Cqdot=cqd, g=g)


def potential_energy(model: RobotModel, q) -> float:
    """Total gravitational potential energy of the point-mass links."""
    origins, _, rots = _chain_frames(model.dh, np.asarray(q, dtype=float))
    u = 0.0
    for k in range(N_JOINTS):
        p_com = origins[k + 1] + rots[k + 1] @ model.link_coms[k]
        u -= model.link_masses[k] * float(model.gravity @ p_com)
    return u


def kinetic_energy(model: RobotModel, q, qdot) -> float:
    qdot = np.asarray(qdot, dtype=float)
    M = extract_terms(model, q, np.zeros(N_JOINTS)).M
    return 0.5 * float(qdot @ M @ qdot)


def resolve_joint_accel(model: RobotModel, q, qdot, xddot_d,
                        z: np.ndarray | None = None) -> np.ndarray:
    """Joint acceleration realizing a task acceleration, null space from z.

    qddot = J# (xddot_d - Jdot qdot) + (I - J# J) z with J# the
    Moore-Penrose pseudo-inverse of the positional Jacobian.
    """
    from .kinematics import jacobian, jacobian_dot

    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    xddot_d = np.asarray(xddot_d, dtype=float)
    if z is None:
        z = np.zeros(N_JOINTS)
    J = jacobian(model, q)
    Jdot = jacobian_dot(model, q, qdot)
    Jpinv = np.linalg.pinv(J)
    primary = Jpinv @ (xddot_d - Jdot @ qdot)
    null = (np.eye(N_JOINTS) - Jpinv @ J) @ np.asarray(z, dtype=float)
    return primary + null


def ctc_torque(model: RobotModel, q, qdot, q_ref, qdot_ref, qddot_ref,
               gains: tuple) -> np.ndarray:
    """Computed-torque law: M (qddot_ref + Kd e_dot + Kp e) + C qdot + g."""
    kp, kd = (np.asarray(g, dtype=float) * np.ones(N_JOINTS) for g in gains)
    if np.any(kp <= 0) or np.any(kd <= 0):
        raise ValueError("gains must be positive")
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    terms = extract_terms(model, q, qdot)
    v = (np.asarray(qddot_ref, dtype=float)
         + kd * (np.asarray(qdot_ref, dtype=float) - qdot)
         + kp * (np.asarray(q_ref, dtype=float) - q))
    return terms.M @ v + terms.Cqdot + terms.g


def step_duration(model: RobotModel, dq: np.ndarray, dt: float = DT_DEFAULT,
                  floor: float = MIN_STEP_DURATION) -> tuple[float, int]:
    """Quintic duration for a joint displacement, quantized to the dt grid."""
    t_raw = float(np.max(np.abs(dq) / model.vel_limits))
    n = max(int(math.ceil(t_raw / dt - 1e-12)), int(round(floor / dt)))
    return n * dt, n


def jerk_squared_integral(x_traj: np.ndarray, dt: float) -> float:
    """Integrated squared jerk from second differences of tip velocity."""
    if x_traj.shape[0] < 4:
        return 0.0
    v = np.diff(x_traj, axis=0) / dt
    jerk = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (dt * dt)
    return float(np.sum(jerk * jerk) * dt)


def execute_microstep(model: RobotModel, state: JointState, q_target: np.ndarray,
                      mode: str = "dynamic", dt: float = DT_DEFAULT,
                      gains: tuple = (100.0, 20.0),
                      floor: float = MIN_STEP_DURATION) -> ExecutionResult:
    """Run one micro-step from the current joint state to q_target.

    mode "dynamic" tracks the quintic with computed torque on integrated
    dynamics; mode "fast" takes the interpolant as the exact result. Effort
    is the integrated |tau|_1 in dynamic mode and the total joint
    displacement in fast mode.
    """
    q_target = model.clamp(np.asarray(q_target, dtype=float))
    dq = q_target - state.q
    duration, n = step_duration(model, dq, dt, floor)
    times = np.arange(n + 1) * dt
    if mode == "fast":
        q_traj, x_traj = _sample_interpolant(model.dh, state.q, dq, duration, n, dt)
        return ExecutionResult(
            q_final=q_target.copy(), qdot_final=np.zeros(N_JOINTS),
            duration=duration, times=times, q_traj=q_traj, x_traj=x_traj,
            effort=float(np.sum(np.abs(dq))),
            jerk_integral=jerk_squared_integral(x_traj, dt),
        )
    if mode != "dynamic":
        raise ValueError(f"unknown fidelity mode: {mode!r}")
    kp = np.full(N_JOINTS, float(gains[0]))
    kd = np.full(N_JOINTS, float(gains[1]))
    q_traj, x_traj, qd_final, effort = _track_reference(
        model.dh, model.link_masses, model.link_coms, model.gravity,
        kp, kd, state.q, state.qdot, state.q, dq, duration, n, dt,
    )
    return ExecutionResult(
        q_final=q_traj[-1].copy(), qdot_final=qd_final,
        duration=duration, times=times, q_traj=q_traj, x_traj=x_traj,
        effort=effort, jerk_integral=jerk_squared_integral(x_traj, dt),
    )


def execute_hold(model: RobotModel, state: JointState, q_hold: np.ndarray,
                 duration: float, dt: float = DT_DEFAULT,
                 gains: tuple = (100.0, 20.0)) -> ExecutionResult:
    """Track a constant reference at q_hold for a fixed duration (dynamic)."""
    q_hold = model.clamp(np.asarray(q_hold, dtype=float))
    n = max(int(round(duration / dt)), 1)
    kp = np.full(N_JOINTS, float(gains[0]))
    kd = np.full(N_JOINTS, float(gains[1]))
    q_traj, x_traj, qd_final, effort = _track_reference(
        model.dh, model.link_masses, model.link_coms, model.gravity,
        kp, kd, state.q, state.qdot, q_hold, np.zeros(N_JOINTS), dt, n, dt,
    )
    times = np.arange(n + 1) * dt
    return ExecutionResult(
        q_final=q_traj[-1].copy(), qdot_final=qd_final, duration=n * dt,
        times=times, q_traj=q_traj, x_traj=x_traj, effort=effort,
        jerk_integral=jerk_squared_integral(x_traj, dt),
    )


def simulate_passive(model: RobotModel, state: JointState, duration: float,
                     dt: float = DT_DEFAULT):
    """Integrate free motion under gravity (zero applied torque)."""
    n = int(round(duration / dt))
    return _simulate_passive(model.dh, model.link_masses, model.link_coms,
                             model.gravity, state.q, state.qdot, n, dt)
