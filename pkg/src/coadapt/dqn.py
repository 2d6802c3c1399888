"""Dual-agent deep Q-learning on a shared team reward.

Two small fully-connected value networks: the radius agent scores the two
admission-radius choices, the magnitude agent scores the eight per-axis
step combinations and additionally observes the radius agent's current
choice as one input bit. Both train from one shared replay buffer with
Huber TD errors, plain SGD, and hard target-network copies.

Networks are plain numpy (float64) so training runs are bit-reproducible
and checkpoints serialize the exact parameters.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import ModelIndex
from .errors import ConfigInvalid, MissingCheckpoint

CHECKPOINT_MAGIC = b"DAMM"
CHECKPOINT_VERSION = 1
N_ACTIONS_RADIUS = 2
N_ACTIONS_MAGNITUDE = 8


@dataclass
class RlState:
    """Normalized observation: positions in [-1, 1], one-hot active model."""

    x_norm: np.ndarray        # (3,)
    goal_norm: np.ndarray     # (3,)
    model_onehot: np.ndarray  # (16,)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.x_norm, self.goal_norm, self.model_onehot])


CORE_DIM = 3 + 3 + 16


def normalize_position(x, lo, hi) -> np.ndarray:
    """Map a workspace position into [-1, 1] per axis."""
    x = np.asarray(x, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return np.clip(2.0 * (x - lo) / (hi - lo) - 1.0, -1.0, 1.0)


def make_state(x, goal, model: ModelIndex, lo, hi) -> RlState:
    onehot = np.zeros(16)
    onehot[model.flat()] = 1.0
    return RlState(normalize_position(x, lo, hi), normalize_position(goal, lo, hi), onehot)


class QNetwork:
    """Feedforward ReLU value network with a linear head."""

    def __init__(self, dims: tuple[int, ...], rng: np.random.Generator | None = None):
        self.dims = tuple(int(d) for d in dims)
        if len(self.dims) < 2:
            raise ConfigInvalid("QNetwork needs at least input and output dims")
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            if rng is None:
                w = np.zeros((fan_out, fan_in))
            else:
                bound = np.sqrt(6.0 / fan_in)
                w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    def copy(self) -> "QNetwork":
        net = QNetwork(self.dims)
        net.weights = [w.copy() for w in self.weights]
        net.biases = [b.copy() for b in self.biases]
        return net

    def load_from(self, other: "QNetwork") -> None:
        self.weights = [w.copy() for w in other.weights]
        self.biases = [b.copy() for b in other.biases]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Values for a single observation vector."""
        h = np.asarray(x, dtype=float)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(w @ h + b, 0.0)
        return self.weights[-1] @ h + self.biases[-1]

    def forward_batch(self, X: np.ndarray):
        """Batched forward pass; returns (values, activations for backward)."""
        acts = [np.asarray(X, dtype=float)]
        h = acts[0]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w.T + b, 0.0)
            acts.append(h)
        out = h @ self.weights[-1].T + self.biases[-1]
        return out, acts

    def gradients(self, acts: list[np.ndarray], dout: np.ndarray):
        """Backprop dout (B, n_actions) through cached activations."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        delta = dout
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = delta.T @ acts[layer]
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer]) * (acts[layer] > 0)
        return grads_w, grads_b

    def sgd_step(self, grads_w, grads_b, lr: float) -> None:
        for w, gw in zip(self.weights, grads_w):
            w -= lr * gw
        for b, gb in zip(self.biases, grads_b):
            b -= lr * gb


def q_forward(net: QNetwork, state) -> np.ndarray:
    """Action values for one observation."""
    x = state.vector() if isinstance(state, RlState) else np.asarray(state, dtype=float)
    if x.shape[0] != net.dims[0]:
        raise ConfigInvalid(
            f"observation dim {x.shape[0]} does not match net input {net.dims[0]}")
    return net.forward(x)


def reward(e, t_step: float, effort: float, n_osc: int, success: bool,
           weights: tuple[float, float, float, float, float]) -> float:
    """Composite per-step reward.

    alpha / (|e|^2 + 0.5) - beta * t_step - gamma * effort - eta * n_osc
    + rho * success.
    """
    alpha, beta, gamma, eta, rho = weights
    if min(alpha, beta, gamma, eta, rho) < 0:
        raise ValueError("reward weights must be non-negative")
    e = np.asarray(e, dtype=float)
    acc = alpha / (float(e @ e) + 0.5)
    return acc - beta * t_step - gamma * effort - eta * n_osc + rho * (1.0 if success else 0.0)


def reward_terms(e, t_step, effort, n_osc, success, weights) -> dict:
    alpha, beta, gamma, eta, rho = weights
    e = np.asarray(e, dtype=float)
    terms = {
        "accuracy": alpha / (float(e @ e) + 0.5),
        "time_penalty": -beta * t_step,
        "effort_penalty": -gamma * effort,
        "osc_penalty": -eta * n_osc,
        "success_bonus": rho * (1.0 if success else 0.0),
    }
    terms["total"] = sum(terms.values())
    return terms


def epsilon_schedule(step: int, start: float = 1.0, final: float = 0.05,
                     decay_steps: int = 10000) -> float:
    """Linear decay from start to final over decay_steps, then constant."""
    if step >= decay_steps:
        return final
    frac = step / decay_steps
    return start + (final - start) * frac


class ReplayBuffer:
    """Fixed-capacity FIFO transition store with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int = CORE_DIM):
        self.capacity = int(capacity)
        self.state_dim = state_dim
        self.states = np.zeros((self.capacity, state_dim))
        self.next_states = np.zeros((self.capacity, state_dim))
        self.actions0 = np.zeros(self.capacity, dtype=np.int64)
        self.actions1 = np.zeros(self.capacity, dtype=np.int64)
        self.rewards = np.zeros(self.capacity)
        self.terminals = np.zeros(self.capacity, dtype=bool)
        self.pos = 0
        self.size = 0

    def push(self, state, action_0: int, action_1: int, r: float,
             next_state, terminal: bool) -> None:
        i = self.pos
        self.states[i] = state.vector() if isinstance(state, RlState) else state
        self.next_states[i] = (next_state.vector()
                               if isinstance(next_state, RlState) else next_state)
        self.actions0[i] = action_0
        self.actions1[i] = action_1
        self.rewards[i] = r
        self.terminals[i] = terminal
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.size, size=batch)

    def __len__(self) -> int:
        return self.size


def _huber_delta(diff: np.ndarray) -> tuple[np.ndarray, float]:
    """Gradient and mean value of the unit-threshold Huber loss."""
    clipped = np.clip(diff, -1.0, 1.0)
    losses = np.where(np.abs(diff) <= 1.0, 0.5 * diff * diff, np.abs(diff) - 0.5)
    return clipped, float(losses.mean())


@dataclass
class DualLearner:
    """Bundles both agents' nets, targets, replay, and update bookkeeping."""

    net0: QNetwork
    net1: QNetwork
    target0: QNetwork
    target1: QNetwork
    buffer: ReplayBuffer
    lr: float = 1e-3
    batch_size: int = 64
    discount: float = 0.99
    target_sync_period: int = 500
    updates: int = 0
    env_steps: int = 0
    epsilon_start: float = 1.0
    epsilon_final: float = 0.05
    epsilon_decay_steps: int = 10000

    @classmethod
    def create(cls, rng: np.random.Generator, hidden=(64, 64),
               buffer_capacity: int = 50000, **kwargs) -> "DualLearner":
        dims0 = (CORE_DIM, *hidden, N_ACTIONS_RADIUS)
        dims1 = (CORE_DIM + 1, *hidden, N_ACTIONS_MAGNITUDE)
        net0 = QNetwork(dims0, rng)
        net1 = QNetwork(dims1, rng)
        return cls(net0=net0, net1=net1, target0=net0.copy(), target1=net1.copy(),
                   buffer=ReplayBuffer(buffer_capacity), **kwargs)

    def epsilon(self) -> float:
        return epsilon_schedule(self.env_steps, self.epsilon_start,
                                self.epsilon_final, self.epsilon_decay_steps)

    def select_actions(self, state: RlState, epsilon_greedy: float,
                       rng: np.random.Generator) -> tuple[int, int]:
        """Radius agent first, then the magnitude agent conditioned on it.

        Returns (action_i in 1..2, action_j in 1..8); Q ties break toward
        the lowest action index.
        """
        core = state.vector()
        if rng.random() < epsilon_greedy:
            a0 = int(rng.integers(0, N_ACTIONS_RADIUS))
        else:
            a0 = int(np.argmax(self.net0.forward(core)))
        obs1 = np.concatenate([core, [float(a0)]])
        if rng.random() < epsilon_greedy:
            a1 = int(rng.integers(0, N_ACTIONS_MAGNITUDE))
        else:
            a1 = int(np.argmax(self.net1.forward(obs1)))
        return a0 + 1, a1 + 1

    def train_step(self, rng: np.random.Generator) -> tuple[float, float] | None:
        """One SGD update per agent from a shared uniform batch."""
        if len(self.buffer) < self.batch_size:
            return None
        idx = self.buffer.sample(self.batch_size, rng)
        s = self.buffer.states[idx]
        sn = self.buffer.next_states[idx]
        r = self.buffer.rewards[idx]
        term = self.buffer.terminals[idx]
        a0 = self.buffer.actions0[idx] - 1
        a1 = self.buffer.actions1[idx] - 1

        q0n, _ = self.target0.forward_batch(sn)
        y0 = r + self.discount * np.where(term, 0.0, q0n.max(axis=1))
        # the magnitude agent's next observation carries the radius agent's
        # greedy next choice
        a0n = q0n.argmax(axis=1).astype(float)
        obs1 = np.hstack([s, a0.astype(float)[:, None]])
        obs1n = np.hstack([sn, a0n[:, None]])
        q1n, _ = self.target1.forward_batch(obs1n)
        y1 = r + self.discount * np.where(term, 0.0, q1n.max(axis=1))

        loss0 = self._update(self.net0, s, a0, y0)
        loss1 = self._update(self.net1, obs1, a1, y1)
        self.updates += 1
        if self.updates % self.target_sync_period == 0:
            self.target0.load_from(self.net0)
            self.target1.load_from(self.net1)
        return loss0, loss1

    def _update(self, net: QNetwork, X, actions, targets) -> float:
        out, acts = net.forward_batch(X)
        taken = out[np.arange(len(actions)), actions]
        grad_q, loss = _huber_delta(taken - targets)
        dout = np.zeros_like(out)
        dout[np.arange(len(actions)), actions] = grad_q / len(actions)
        grads_w, grads_b = net.gradients(acts, dout)
        net.sgd_step(grads_w, grads_b, self.lr)
        return loss


def save_checkpoint(path, nets: list[QNetwork]) -> None:
    """Versioned binary blob: magic, version, per-net dims and float64 params."""
    buf = bytearray()
    buf += CHECKPOINT_MAGIC
    buf += struct.pack("<II", CHECKPOINT_VERSION, len(nets))
    for net in nets:
        buf += struct.pack("<I", len(net.dims))
        buf += struct.pack(f"<{len(net.dims)}I", *net.dims)
        for w, b in zip(net.weights, net.biases):
            buf += np.ascontiguousarray(w, dtype="<f8").tobytes()
            buf += np.ascontiguousarray(b, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(buf))


def load_checkpoint(path) -> list[QNetwork]:
    p = Path(path)
    if not p.exists():
        raise MissingCheckpoint(f"checkpoint not found: {p}")
    raw = p.read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ConfigInvalid(f"{p} is not a checkpoint (bad magic)")
    version, n_nets = struct.unpack_from("<II", raw, 4)
    if version != CHECKPOINT_VERSION:
        raise ConfigInvalid(f"unsupported checkpoint version {version}")
    off = 12
    nets = []
    for _ in range(n_nets):
        (n_dims,) = struct.unpack_from("<I", raw, off)
        off += 4
        dims = struct.unpack_from(f"<{n_dims}I", raw, off)
        off += 4 * n_dims
        net = QNetwork(dims)
        for layer, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            w = np.frombuffer(raw, dtype="<f8", count=fan_in * fan_out, offset=off)
            off += 8 * fan_in * fan_out
            b = np.frombuffer(raw, dtype="<f8", count=fan_out, offset=off)
            off += 8 * fan_out
            net.weights[layer] = w.reshape(fan_out, fan_in).copy()
            net.biases[layer] = b.copy()
        nets.append(net)
    return nets
