import numpy as np
import pytest

from coadapt.agents import ModelIndex
from coadapt.dqn import (CORE_DIM, DualLearner, QNetwork, ReplayBuffer,
                         RlState, epsilon_schedule, load_checkpoint,
                         make_state, q_forward, reward, save_checkpoint)
from coadapt.errors import ConfigInvalid, MissingCheckpoint


def small_state(rng=None):
    onehot = np.zeros(16)
    onehot[3] = 1.0
    x = rng.normal(size=3) if rng is not None else np.zeros(3)
    return RlState(x, np.zeros(3), onehot)


def test_zero_weights_zero_output():
    net = QNetwork((CORE_DIM, 8, 2))
    assert np.all(q_forward(net, small_state()) == 0.0)


def test_hand_set_single_unit():
    net = QNetwork((2, 1, 1))
    net.weights[0][0] = [1.0, -2.0]
    net.biases[0][0] = 0.5
    net.weights[1][0, 0] = 3.0
    net.biases[1][0] = -1.0
    out = net.forward(np.array([2.0, 0.25]))
    # hidden = relu(2 - 0.5 + 0.5) = 2; out = 3*2 - 1 = 5
    assert out[0] == pytest.approx(5.0)


def test_dimension_mismatch_raises():
    net = QNetwork((10, 4, 2))
    with pytest.raises(ConfigInvalid):
        q_forward(net, np.zeros(7))


def grad_finite_difference_check(dims, seed):
    rng = np.random.default_rng(seed)
    net = QNetwork(dims, rng)
    B = 5
    X = rng.normal(size=(B, dims[0]))
    actions = rng.integers(0, dims[-1], size=B)
    targets = rng.normal(size=B)

    def loss():
        out, _ = net.forward_batch(X)
        taken = out[np.arange(B), actions]
        return 0.5 * float(np.sum((taken - targets) ** 2))

    out, acts = net.forward_batch(X)
    taken = out[np.arange(B), actions]
    dout = np.zeros_like(out)
    dout[np.arange(B), actions] = taken - targets
    gw, gb = net.gradients(acts, dout)

    h = 1e-6
    worst = 0.0
    for layer in range(len(net.weights)):
        for arr, grad in ((net.weights[layer], gw[layer]),
                          (net.biases[layer], gb[layer])):
            flat = arr.reshape(-1)
            gflat = np.asarray(grad).reshape(-1)
            for idx in range(0, flat.size, max(flat.size // 25, 1)):
                old = flat[idx]
                flat[idx] = old + h
                lp = loss()
                flat[idx] = old - h
                lm = loss()
                flat[idx] = old
                fd = (lp - lm) / (2 * h)
                worst = max(worst, abs(fd - gflat[idx]) / (1.0 + abs(fd)))
    return worst


def test_gradients_match_finite_differences():
    assert grad_finite_difference_check((6, 10, 4), 1) <= 1e-4
    assert grad_finite_difference_check((4, 8, 8, 3), 2) <= 1e-4


def test_reward_plug_in():
    assert reward(np.zeros(3), 0.0, 0.0, 0, True, (1, 0, 0, 0, 1)) == \
        pytest.approx(3.0)   # 2*alpha + rho


def test_reward_beta_zero_time_independent():
    w = (1.0, 0.0, 0.01, 0.5, 10.0)
    e = np.array([0.1, 0.0, 0.0])
    assert reward(e, 0.0, 0.2, 1, False, w) == \
        pytest.approx(reward(e, 99.0, 0.2, 1, False, w))


def test_reward_accuracy_term_bounded():
    w = (1.0, 0.1, 0.01, 0.5, 10.0)
    far = reward(np.array([100.0, 0, 0]), 1.0, 0.5, 2, False, w)
    assert far == pytest.approx(-0.1 - 0.005 - 1.0, abs=1e-3)
    for _ in range(100):
        e = np.random.default_rng(0).normal(size=3)
        r = reward(e, 0.0, 0.0, 0, True, w)
        assert r <= 2 * w[0] + w[4]


def test_select_actions_deterministic_exploit(rng):
    learner = DualLearner.create(rng, hidden=(8,))
    st = small_state()
    learner.net0.biases[-1][:] = [0.0, 1.0]
    learner.net1.weights = [np.zeros_like(w) for w in learner.net1.weights]
    learner.net1.biases = [np.zeros_like(b) for b in learner.net1.biases]
    learner.net1.biases[-1][:] = [0, 0, 3, 0, 0, 0, 0, 0]
    a_i, a_j = learner.select_actions(st, 0.0, np.random.default_rng(0))
    assert (a_i, a_j) == (2, 3)


def test_select_actions_tie_break_lowest(rng):
    learner = DualLearner.create(rng, hidden=(8,))
    for net in (learner.net0, learner.net1):
        net.weights = [np.zeros_like(w) for w in net.weights]
        net.biases = [np.zeros_like(b) for b in net.biases]
    a_i, a_j = learner.select_actions(small_state(), 0.0,
                                      np.random.default_rng(0))
    assert (a_i, a_j) == (1, 1)


def test_select_actions_uniform_exploration(rng):
    learner = DualLearner.create(rng, hidden=(8,))
    draw_rng = np.random.default_rng(5)
    counts = np.zeros(8)
    n = 100_000
    st = small_state()
    for _ in range(n):
        _, a_j = learner.select_actions(st, 1.0, draw_rng)
        counts[a_j - 1] += 1
    expected = n / 8
    sigma = np.sqrt(n * (1 / 8) * (7 / 8))
    assert np.all(np.abs(counts - expected) <= 3 * sigma + 1)


def test_epsilon_schedule_shape():
    assert epsilon_schedule(0) == 1.0
    assert epsilon_schedule(5000) == pytest.approx(0.525)
    assert epsilon_schedule(10000) == 0.05
    assert epsilon_schedule(1_000_000) == 0.05


def test_replay_fifo_eviction():
    buf = ReplayBuffer(5, state_dim=2)
    for k in range(8):
        buf.push(np.array([k, k]), 1, 1, float(k), np.array([k, k]), False)
    assert len(buf) == 5
    assert set(buf.rewards.astype(int)) == {3, 4, 5, 6, 7}


def test_replay_uniform_sampling_chi_square():
    buf = ReplayBuffer(100, state_dim=1)
    for k in range(100):
        buf.push(np.array([k]), 1, 1, 0.0, np.array([k]), False)
    rng = np.random.default_rng(9)
    draws = buf.sample(100_000, rng)
    counts = np.bincount(draws, minlength=100)
    expected = 1000.0
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    # 99 dof: mean 99, sd ~14; 99 + 5 sd ~ 170
    assert chi2 < 170.0


def test_terminal_transition_fixed_point(rng):
    learner = DualLearner.create(rng, hidden=(16, 16), buffer_capacity=256,
                                 lr=5e-3)
    st = small_state()
    for _ in range(200):
        learner.buffer.push(st, 1, 3, 1.0, st, True)
    train_rng = np.random.default_rng(3)
    for _ in range(3000):
        learner.train_step(train_rng)
    assert learner.net0.forward(st.vector())[0] == pytest.approx(1.0, abs=1e-2)
    obs1 = np.concatenate([st.vector(), [0.0]])
    assert learner.net1.forward(obs1)[2] == pytest.approx(1.0, abs=1e-2)


def test_zero_discount_targets_are_rewards(rng):
    learner = DualLearner.create(rng, hidden=(8,), discount=0.0, lr=5e-3)
    st = small_state()
    for _ in range(100):
        learner.buffer.push(st, 2, 5, 0.7, st, False)
    train_rng = np.random.default_rng(4)
    for _ in range(2500):
        learner.train_step(train_rng)
    assert learner.net0.forward(st.vector())[1] == pytest.approx(0.7, abs=2e-2)


def test_two_state_chain_matches_value_iteration(rng):
    """Deterministic 2-state chain: s0 -(a0)-> s1 -(a0)-> terminal(r=1);
    wrong action stays with r=0. Compare against the value-iteration table."""
    gamma = 0.9
    # value iteration on the tiny MDP
    V = np.zeros(2)
    for _ in range(200):
        V = np.array([gamma * V[1], 1.0])
    # q-learning via the learner on matching transitions
    onehots = np.eye(16)
    s0 = RlState(np.array([-0.5, 0, 0]), np.zeros(3), onehots[0])
    s1 = RlState(np.array([0.5, 0, 0]), np.zeros(3), onehots[0])
    learner = DualLearner.create(rng, hidden=(24, 24), discount=gamma, lr=3e-3,
                                 target_sync_period=200)
    for _ in range(150):
        learner.buffer.push(s0, 1, 1, 0.0, s1, False)   # advance
        learner.buffer.push(s0, 2, 2, 0.0, s0, False)   # stall
        learner.buffer.push(s1, 1, 1, 1.0, s1, True)    # reach terminal
        learner.buffer.push(s1, 2, 2, 0.0, s0, False)   # fall back
    train_rng = np.random.default_rng(11)
    for _ in range(12000):
        learner.train_step(train_rng)
    q_s0 = learner.net0.forward(s0.vector())
    q_s1 = learner.net0.forward(s1.vector())
    assert q_s0[0] == pytest.approx(gamma * V[1], abs=5e-2)
    assert q_s1[0] == pytest.approx(1.0, abs=5e-2)


def test_checkpoint_round_trip(tmp_path, rng):
    learner = DualLearner.create(rng)
    path = tmp_path / "nets.damm"
    save_checkpoint(path, [learner.net0, learner.net1])
    nets = load_checkpoint(path)
    probe = rng.normal(size=CORE_DIM)
    assert np.array_equal(nets[0].forward(probe), learner.net0.forward(probe))
    probe1 = rng.normal(size=CORE_DIM + 1)
    assert np.array_equal(nets[1].forward(probe1), learner.net1.forward(probe1))
    raw = path.read_bytes()
    assert raw[:4] == b"DAMM"


def test_checkpoint_missing_raises(tmp_path):
    with pytest.raises(MissingCheckpoint):
        load_checkpoint(tmp_path / "absent.damm")


def test_training_determinism(rng):
    def run():
        lrn = DualLearner.create(np.random.default_rng(42), hidden=(16,))
        st = small_state(np.random.default_rng(1))
        t_rng = np.random.default_rng(7)
        for k in range(300):
            lrn.buffer.push(st, 1 + k % 2, 1 + k % 8, float(k % 3), st,
                            k % 5 == 0)
            lrn.train_step(t_rng)
        return lrn
    a, b = run(), run()
    for wa, wb in zip(a.net0.weights, b.net0.weights):
        assert np.array_equal(wa, wb)
    for wa, wb in zip(a.net1.weights, b.net1.weights):
        assert np.array_equal(wa, wb)


def test_make_state_normalization():
    lo = np.array([0.2, -0.2, 0.1])
    hi = np.array([0.5, 0.2, 0.4])
    st = make_state(np.array([0.35, 0.0, 0.25]), hi, ModelIndex(2, 3), lo, hi)
    np.testing.assert_allclose(st.x_norm, 0.0, atol=1e-12)
    np.testing.assert_allclose(st.goal_norm, 1.0, atol=1e-12)
    assert st.model_onehot.sum() == 1.0
    assert st.model_onehot[ModelIndex(2, 3).flat()] == 1.0
    assert st.vector().shape == (CORE_DIM,)
