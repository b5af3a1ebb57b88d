"""Agent contracts: action selection, soft updates, update laws, bandit
fixed points, checkpoint bit-reproduction."""

import copy

import numpy as np
import pytest

from latentrl.agents import (
    AgentHyperparams,
    ddpg_update,
    load_agent,
    make_agent,
    sac_update,
    save_agent,
    select_action,
    soft_update,
    td3_update,
)
from latentrl.env import EnvConfig, env_step, init_state
from latentrl.errors import ConfigError, InputError
from latentrl.nets import make_mlp
from latentrl.oracles import SyntheticOracle, make_world
from latentrl.replay import ReplayBuffer, TransitionRecord


def small_hp(**kw):
    defaults = dict(
        learning_rate=3e-3, hidden_sizes=(32, 32), batch_size=64, replay_capacity=8192
    )
    defaults.update(kw)
    return AgentHyperparams(**defaults)


def random_batch(buf, agent, rng, k, n=200, reward=1.0, done=True):
    s = np.zeros(k)
    for _ in range(n):
        a = rng.uniform(-1, 1, k)
        buf.push(TransitionRecord(s, a, reward, s, done))


def clone_agent(agent, tmp_path, tag):
    path = tmp_path / f"{tag}.npz"
    save_agent(path, agent)
    twin, _, _ = load_agent(path)
    return twin


# --- select_action ------------------------------------------------------------


@pytest.mark.parametrize("algo", ["sac", "td3", "ddpg"])
def test_exploit_actions_deterministic_and_shaped(algo):
    agent = make_agent(algo, 5, small_hp(), np.random.default_rng(0))
    state = np.random.default_rng(1).normal(size=5)
    a1 = select_action(agent, state, "exploit")
    a2 = select_action(agent, state, "exploit")
    assert np.array_equal(a1, a2)
    assert a1.shape == (5,)
    assert np.all(np.abs(a1) < 1.0)


@pytest.mark.parametrize("algo", ["sac", "td3", "ddpg"])
def test_explore_actions_inside_scaled_box(algo):
    agent = make_agent(algo, 4, small_hp(), np.random.default_rng(2), action_scale=2.5)
    state = np.zeros(4)
    for _ in range(200):
        a = select_action(agent, state, "explore")
        assert np.all(np.abs(a) < 2.5)


def test_sac_explore_has_nonzero_spread():
    agent = make_agent("sac", 3, small_hp(), np.random.default_rng(3))
    state = np.ones(3)
    draws = np.stack([select_action(agent, state, "explore") for _ in range(1000)])
    assert draws.std(axis=0).min() > 1e-4


def test_select_action_validates_inputs():
    agent = make_agent("sac", 3, small_hp(), np.random.default_rng(4))
    with pytest.raises(InputError):
        select_action(agent, np.zeros(2), "exploit")
    with pytest.raises(InputError):
        select_action(agent, np.zeros(3), "both")
    with pytest.raises(ConfigError):
        make_agent("ppo", 3, small_hp(), np.random.default_rng(0))


# --- soft updates ---------------------------------------------------------------


def test_soft_update_endpoints():
    rng = np.random.default_rng(5)
    target = make_mlp((3, 8, 2), "relu", rng)
    online = make_mlp((3, 8, 2), "relu", rng)
    before = target.theta.copy()
    soft_update(target, online, 0.0)
    assert np.array_equal(target.theta, before)
    soft_update(target, online, 1.0)
    assert np.array_equal(target.theta, online.theta)


def test_soft_update_geometric_approach():
    target = np.zeros(1)
    online = np.ones(1)
    for _ in range(100):
        soft_update(target, online, 0.01)
    assert target[0] == pytest.approx(1 - 0.99**100, abs=1e-12)  # ~0.6340


def test_soft_update_convergence_ratio():
    rng = np.random.default_rng(6)
    target = make_mlp((4, 6, 2), "relu", rng)
    online = make_mlp((4, 6, 2), "relu", rng)
    tau = 0.03
    err = np.linalg.norm(target.theta - online.theta)
    for _ in range(20):
        soft_update(target, online, tau)
        new_err = np.linalg.norm(target.theta - online.theta)
        assert new_err / err == pytest.approx(1 - tau, abs=1e-12)
        err = new_err


def test_soft_update_rejects_shape_mismatch():
    rng = np.random.default_rng(7)
    with pytest.raises(InputError):
        soft_update(
            make_mlp((3, 4, 2), "relu", rng), make_mlp((3, 5, 2), "relu", rng), 0.5
        )


# --- update laws -----------------------------------------------------------------


def test_sac_terminal_batch_masks_discount(tmp_path):
    # with done=True everywhere the discount cannot matter
    k = 3
    rngs = [np.random.default_rng(8), np.random.default_rng(8)]
    agents = [
        make_agent("sac", k, small_hp(discount=g), r)
        for g, r in zip((0.99, 0.5), rngs)
    ]
    buf = ReplayBuffer(1024, k)
    random_batch(buf, agents[0], np.random.default_rng(9), k, done=True)
    for agent in agents:
        batch = buf.sample(64, np.random.default_rng(10))
        sac_update(agent, batch)
    assert np.array_equal(agents[0].q1.theta, agents[1].q1.theta)
    assert np.array_equal(agents[0].policy.theta, agents[1].policy.theta)


def test_tau_one_snaps_targets_to_online():
    k = 3
    agent = make_agent("sac", k, small_hp(soft_update=1.0), np.random.default_rng(11))
    buf = ReplayBuffer(1024, k)
    random_batch(buf, agent, np.random.default_rng(12), k)
    sac_update(agent, buf.sample(64, agent.rng))
    assert np.array_equal(agent.q1_target.theta, agent.q1.theta)
    assert np.array_equal(agent.q2_target.theta, agent.q2.theta)


def test_td3_policy_delay_skips_odd_updates():
    k = 3
    agent = make_agent("td3", k, small_hp(policy_delay=2), np.random.default_rng(13))
    buf = ReplayBuffer(1024, k)
    random_batch(buf, agent, np.random.default_rng(14), k)
    theta0 = agent.policy.theta.copy()
    report = td3_update(agent, buf.sample(64, agent.rng), 1)  # odd index
    assert np.array_equal(agent.policy.theta, theta0)
    assert report.policy_loss is None
    report = td3_update(agent, buf.sample(64, agent.rng), 2)  # even index
    assert not np.array_equal(agent.policy.theta, theta0)
    assert report.policy_loss is not None


def test_td3_zero_noise_clip_equals_zero_target_noise(tmp_path):
    # clipping the smoothing noise at zero must reproduce noiseless targets
    k = 3
    base = make_agent(
        "td3", k, small_hp(target_noise=0.2, noise_clip=0.0), np.random.default_rng(15)
    )
    twin = clone_agent(base, tmp_path, "td3")
    twin.hyperparams = small_hp(target_noise=0.0, noise_clip=0.5)
    buf = ReplayBuffer(1024, k)
    random_batch(buf, base, np.random.default_rng(16), k, done=False)
    for agent in (base, twin):
        batch = buf.sample(64, np.random.default_rng(17))
        td3_update(agent, batch, 0)
    assert np.array_equal(base.q1.theta, twin.q1.theta)
    assert np.array_equal(base.policy.theta, twin.policy.theta)


def test_ddpg_terminal_target_is_reward_and_tau_zero_freezes():
    k = 3
    agent = make_agent("ddpg", k, small_hp(soft_update=1e-9), np.random.default_rng(18))
    # effectively frozen targets at tau ~ 0
    t0 = agent.q1_target.theta.copy()
    buf = ReplayBuffer(1024, k)
    random_batch(buf, agent, np.random.default_rng(19), k, done=True)
    ddpg_update(agent, buf.sample(64, agent.rng))
    assert np.allclose(agent.q1_target.theta, t0, atol=1e-8)
    # terminal batch: discount masked, same argument as SAC
    rngs = [np.random.default_rng(20), np.random.default_rng(20)]
    agents = [
        make_agent("ddpg", k, small_hp(discount=g), r)
        for g, r in zip((0.99, 0.25), rngs)
    ]
    for agent in agents:
        ddpg_update(agent, buf.sample(64, np.random.default_rng(21)))
    assert np.array_equal(agents[0].q1.theta, agents[1].q1.theta)


@pytest.mark.parametrize("algo", ["sac", "td3", "ddpg"])
def test_updates_preserve_parameter_counts(algo):
    k = 3
    agent = make_agent(algo, k, small_hp(), np.random.default_rng(22))
    counts = {name: net.param_count for name, net in agent.networks()}
    buf = ReplayBuffer(1024, k)
    random_batch(buf, agent, np.random.default_rng(23), k)
    for i in range(5):
        batch = buf.sample(64, agent.rng)
        if algo == "sac":
            sac_update(agent, batch)
        elif algo == "td3":
            td3_update(agent, batch, i)
        else:
            ddpg_update(agent, batch)
    assert counts == {name: net.param_count for name, net in agent.networks()}
    for _, net in agent.networks():
        assert np.isfinite(net.theta).all()


# --- bandit fixed points -----------------------------------------------------------


@pytest.mark.parametrize("algo", ["sac", "td3", "ddpg"])
def test_bandit_critic_converges_to_reward(algo):
    # terminal transitions realize the no-bootstrap bandit: target == c
    c = 1.0
    k = 1
    agent = make_agent(algo, k, small_hp(), np.random.default_rng(24))
    buf = ReplayBuffer(4096, k)
    rng = np.random.default_rng(25)
    s = np.zeros(k)
    for _ in range(512):
        buf.push(TransitionRecord(s, rng.uniform(-1, 1, k), c, s, True))
    for i in range(2000):
        batch = buf.sample(64, agent.rng)
        if algo == "sac":
            sac_update(agent, batch)
        elif algo == "td3":
            td3_update(agent, batch, i)
        else:
            ddpg_update(agent, batch)
    a = select_action(agent, s, "exploit")
    assert agent.critic_value(s, a) == pytest.approx(c, abs=1e-2)


# --- determinism and checkpoints ------------------------------------------------


def train_small(algo, seed, updates=60):
    k = 3
    agent = make_agent(algo, k, small_hp(), np.random.default_rng(seed))
    buf = ReplayBuffer(1024, k)
    random_batch(buf, agent, np.random.default_rng(seed + 1), k)
    for i in range(updates):
        batch = buf.sample(64, agent.rng)
        if algo == "sac":
            sac_update(agent, batch)
        elif algo == "td3":
            td3_update(agent, batch, i)
        else:
            ddpg_update(agent, batch)
    return agent


@pytest.mark.parametrize("algo", ["sac", "td3", "ddpg"])
def test_training_is_bit_reproducible(algo):
    a = train_small(algo, 30)
    b = train_small(algo, 30)
    for (_, na), (_, nb) in zip(a.networks(), b.networks()):
        assert np.array_equal(na.theta, nb.theta)


@pytest.mark.parametrize("algo", ["sac", "td3", "ddpg"])
def test_checkpoint_bit_reproduces_subsequent_training(algo, tmp_path):
    k = 3
    agent = make_agent(algo, k, small_hp(), np.random.default_rng(31))
    buf = ReplayBuffer(1024, k)
    random_batch(buf, agent, np.random.default_rng(32), k)
    for i in range(20):
        batch = buf.sample(64, agent.rng)
        if algo == "sac":
            sac_update(agent, batch)
        elif algo == "td3":
            td3_update(agent, batch, i)
        else:
            ddpg_update(agent, batch)
    twin = clone_agent(agent, tmp_path, algo)
    assert twin.update_count == agent.update_count
    for i in range(20, 40):
        batch_a = buf.sample(64, agent.rng)
        batch_b = buf.sample(64, twin.rng)
        assert np.array_equal(batch_a.states, batch_b.states)
        if algo == "sac":
            sac_update(agent, batch_a)
            sac_update(twin, batch_b)
        elif algo == "td3":
            td3_update(agent, batch_a, i)
            td3_update(twin, batch_b, i)
        else:
            ddpg_update(agent, batch_a)
            ddpg_update(twin, batch_b)
    for (_, na), (_, nb) in zip(agent.networks(), twin.networks()):
        assert np.array_equal(na.theta, nb.theta)


def test_sac_policy_gradients_match_finite_differences():
    from latentrl.agents.sac import policy_gradients, policy_objective

    k = 3
    agent = make_agent("sac", k, small_hp(), np.random.default_rng(40), action_scale=1.5)
    rng = np.random.default_rng(41)
    s = rng.normal(size=(8, k))
    noise = rng.normal(size=(8, k))
    temp = 0.37
    grads, _, loss = policy_gradients(agent, s, noise, temp)
    assert loss == pytest.approx(policy_objective(agent, s, noise, temp), abs=1e-12)
    h = 1e-6
    for idx in rng.choice(agent.policy.param_count, size=60, replace=False):
        saved = agent.policy.theta[idx]
        agent.policy.theta[idx] = saved + h
        hi = policy_objective(agent, s, noise, temp)
        agent.policy.theta[idx] = saved - h
        lo = policy_objective(agent, s, noise, temp)
        agent.policy.theta[idx] = saved
        fd = (hi - lo) / (2 * h)
        assert grads[idx] == pytest.approx(fd, rel=2e-4, abs=1e-8)


@pytest.mark.parametrize("algo", ["td3", "ddpg"])
def test_deterministic_policy_gradients_match_finite_differences(algo):
    from latentrl.agents.td3 import policy_gradients

    k = 3
    agent = make_agent(algo, k, small_hp(), np.random.default_rng(42), action_scale=2.0)
    rng = np.random.default_rng(43)
    s = rng.normal(size=(8, k))

    def objective():
        from latentrl.nets import mlp_forward

        a = np.tanh(mlp_forward(agent.policy, s)[-1]) * agent.action_scale
        san = np.concatenate([s, a], axis=1)
        return float(-np.mean(mlp_forward(agent.q1, san)[-1][:, 0]))

    grads, loss = policy_gradients(agent, s)
    assert loss == pytest.approx(objective(), abs=1e-12)
    h = 1e-6
    for idx in rng.choice(agent.policy.param_count, size=60, replace=False):
        saved = agent.policy.theta[idx]
        agent.policy.theta[idx] = saved + h
        hi = objective()
        agent.policy.theta[idx] = saved - h
        lo = objective()
        agent.policy.theta[idx] = saved
        fd = (hi - lo) / (2 * h)
        assert grads[idx] == pytest.approx(fd, rel=2e-4, abs=1e-8)


def test_sac_entropy_tracks_target_under_auto_temperature():
    k = 4
    world = make_world(3, k=k, d=8, num_classes=3, separation=2.0, samples_per_class=8)
    oracle = SyntheticOracle(world)
    env = EnvConfig(latent_dim=k, num_classes=3, target_class=0)
    hp = small_hp(temperature_lr=1e-2)
    agent = make_agent("sac", k, hp, np.random.default_rng(5))
    buf = ReplayBuffer(10_000, k)
    rng = np.random.default_rng(6)
    entropies = []
    for ep in range(2200):
        s = init_state(k, rng)
        a = select_action(agent, s, "explore") if ep >= 64 else rng.uniform(-1, 1, k)
        out = env_step(s, a, oracle, env, 1)
        buf.push(TransitionRecord(s, a, out.reward, out.next_state, out.done))
        if buf.size >= hp.batch_size:
            entropies.append(sac_update(agent, buf.sample(hp.batch_size, agent.rng)).entropy)
    running = float(np.mean(entropies[-500:]))
    assert abs(running - (-k)) < 0.5
