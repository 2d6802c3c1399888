"""Forward kinematics, Jacobians, and numerical inverse kinematics.

The arm is a 6-joint revolute serial chain described by standard
Denavit-Hartenberg rows (a, d, alpha, theta_offset). Joint k rotates about
the z axis of frame k-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._jit import njit
from .errors import ConfigInvalid, IkNoConvergence

N_JOINTS = 6


@dataclass(frozen=True)
class RobotModel:
    """Kinematic and dynamic description of the 6-DoF chain."""

    dh: np.ndarray           # (6, 4) rows of (a, d, alpha, theta_offset)
    joint_limits: np.ndarray  # (6, 2) [min, max] rad
    vel_limits: np.ndarray    # (6,) rad/s
    link_masses: np.ndarray   # (6,) kg
    link_coms: np.ndarray     # (6, 3) COM offsets in link frames, m
    gravity: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.0, -9.81])
    )

    def __post_init__(self):
        for name in ("dh", "joint_limits", "vel_limits", "link_masses",
                     "link_coms", "gravity"):
            object.__setattr__(
                self, name, np.ascontiguousarray(getattr(self, name), dtype=float)
            )
        if self.dh.shape != (N_JOINTS, 4):
            raise ConfigInvalid(f"dh must be (6, 4), got {self.dh.shape}")
        if self.joint_limits.shape != (N_JOINTS, 2):
            raise ConfigInvalid("joint_limits must be (6, 2)")
        if np.any(self.joint_limits[:, 0] >= self.joint_limits[:, 1]):
            raise ConfigInvalid("joint limits require min < max")
        if self.vel_limits.shape != (N_JOINTS,) or np.any(self.vel_limits <= 0):
            raise ConfigInvalid("vel_limits must be 6 positive values")
        if self.link_masses.shape != (N_JOINTS,) or np.any(self.link_masses <= 0):
            raise ConfigInvalid("link_masses must be 6 positive values")
        if self.link_coms.shape != (N_JOINTS, 3):
            raise ConfigInvalid("link_coms must be (6, 3)")
        if self.gravity.shape != (3,):
            raise ConfigInvalid("gravity must be a 3-vector")

    @classmethod
    def from_config(cls, section: dict) -> "RobotModel":
        return cls(
            dh=np.asarray(section["dh"], dtype=float),
            joint_limits=np.asarray(section["joint_limits"], dtype=float),
            vel_limits=np.asarray(section["vel_limits"], dtype=float),
            link_masses=np.asarray(section["link_masses"], dtype=float),
            link_coms=np.asarray(section["link_coms"], dtype=float),
            gravity=np.asarray(section["gravity"], dtype=float),
        )

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.joint_limits[:, 0], self.joint_limits[:, 1])

    def max_reach(self) -> float:
        """Upper bound on end-effector distance from the base."""
        return float(np.sum(np.abs(self.dh[:, 0])) + np.sum(np.abs(self.dh[:, 1])))


@dataclass
class JointState:
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(N_JOINTS)
        self.qdot = np.asarray(self.qdot, dtype=float).reshape(N_JOINTS)
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qdot))):
            raise ValueError("joint state must be finite")

    @classmethod
    def at_rest(cls, q) -> "JointState":
        return cls(np.asarray(q, dtype=float), np.zeros(N_JOINTS))


@dataclass
class CartesianState:
    x: np.ndarray
    xdot: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(3)
        self.xdot = np.asarray(self.xdot, dtype=float).reshape(3)
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.xdot))):
            raise ValueError("cartesian state must be finite")


@njit(cache=True)
def _chain_frames(dh, q):
    """Propagate the DH chain; returns joint origins, z axes, and rotations.

    Index 0 is the base frame, index k the frame after joint k.
    """
    n = dh.shape[0]
    origins = np.zeros((n + 1, 3))
    zaxes = np.zeros((n + 1, 3))
    rots = np.zeros((n + 1, 3, 3))
    zaxes[0, 2] = 1.0
    for i in range(3):
        rots[0, i, i] = 1.0
    for k in range(n):
        a = dh[k, 0]
        d = dh[k, 1]
        ca = np.cos(dh[k, 2])
        sa = np.sin(dh[k, 2])
        th = q[k] + dh[k, 3]
        ct = np.cos(th)
        st = np.sin(th)
        # local transform of frame k in frame k-1
        rl = np.empty((3, 3))
        rl[0, 0] = ct
        rl[0, 1] = -st * ca
        rl[0, 2] = st * sa
        rl[1, 0] = st
        rl[1, 1] = ct * ca
        rl[1, 2] = -ct * sa
        rl[2, 0] = 0.0
        rl[2, 1] = sa
        rl[2, 2] = ca
        pl = np.empty(3)
        pl[0] = a * ct
        pl[1] = a * st
        pl[2] = d
        rots[k + 1] = rots[k] @ rl
        origins[k + 1] = origins[k] + rots[k] @ pl
        zaxes[k + 1] = rots[k + 1, :, 2]
    return origins, zaxes, rots


@njit(cache=True)
def _fk_position(dh, q):
    origins, _, _ = _chain_frames(dh, q)
    return origins[dh.shape[0]]


@njit(cache=True)
def _jacobian(dh, q):
    n = dh.shape[0]
    origins, zaxes, _ = _chain_frames(dh, q)
    tip = origins[n]
    jac = np.empty((3, n))
    for k in range(n):
        z = zaxes[k]
        r = tip - origins[k]
        jac[0, k] = z[1] * r[2] - z[2] * r[1]
        jac[1, k] = z[2] * r[0] - z[0] * r[2]
        jac[2, k] = z[0] * r[1] - z[1] * r[0]
    return jac


@njit(cache=True)
def _ik_dls(dh, q_seed, target, lo, hi, tol, damping, max_iters):
    """Damped least-squares IK with per-iteration clamping to joint limits."""
    q = q_seed.copy()
    lam2 = damping * damping
    residual = 0.0
    it = 0
    for it in range(max_iters + 1):
        err = target - _fk_position(dh, q)
        residual = np.sqrt(err[0] ** 2 + err[1] ** 2 + err[2] ** 2)
        if residual <= tol or it == max_iters:
            break
        jac = _jacobian(dh, q)
        jjt = jac @ jac.T
        for i in range(3):
            jjt[i, i] += lam2
        y = np.linalg.solve(jjt, err)
        dq = jac.T @ y
        for i in range(q.shape[0]):
            qi = q[i] + dq[i]
            if qi < lo[i]:
                qi = lo[i]
            elif qi > hi[i]:
                qi = hi[i]
            q[i] = qi
    return q, residual, it


def forward_kinematics(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """End-effector position of the chain at configuration q."""
    return _fk_position(model.dh, np.asarray(q, dtype=float))


def chain_frames(model: RobotModel, q: np.ndarray):
    """Joint origins, joint z axes, and link rotations (base frame included)."""
    return _chain_frames(model.dh, np.asarray(q, dtype=float))


def jacobian(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """3x6 positional Jacobian d(position)/dq."""
    return _jacobian(model.dh, np.asarray(q, dtype=float))


def jacobian_dot(model: RobotModel, q: np.ndarray, qdot: np.ndarray,
                 h: float = 1e-6) -> np.ndarray:
    """Time derivative of the Jacobian along qdot.

    Directional central difference: (J(q + h qdot) - J(q - h qdot)) / 2h.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    jp = _jacobian(model.dh, q + h * qdot)
    jm = _jacobian(model.dh, q - h * qdot)
    return (jp - jm) / (2.0 * h)


def ik_solve(model: RobotModel, q_seed: np.ndarray, x_target: np.ndarray,
             tol: float = 1e-4, damping: float = 1e-3,
             max_iters: int = 200) -> np.ndarray:
    """Solve position IK by damped least squares, clamped to joint limits.

    Seeded at q_seed so consecutive micro-steps land on nearby branches.
    Raises IkNoConvergence when the residual stays above tol.
    """
    q_seed = np.asarray(q_seed, dtype=float)
    x_target = np.asarray(x_target, dtype=float)
    if not np.all(np.isfinite(x_target)):
        raise ValueError("x_target must be finite")
    q, residual, iters = _ik_dls(
        model.dh, q_seed, x_target,
        model.joint_limits[:, 0], model.joint_limits[:, 1],
        tol, damping, max_iters,
    )
    if residual > tol:
        raise IkNoConvergence(residual, iters)
    return q
