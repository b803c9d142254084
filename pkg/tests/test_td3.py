import numpy as np
import pytest
from scipy import stats

from uavthz import neural, td3
from uavthz.channel import ChannelParams
from uavthz.environment import EnvConfig, Environment
from uavthz.errors import InvalidInputError
from uavthz.td3 import (Normalizer, ReplayBuffer, Td3Agent, Td3Hyperparams,
                        Transition)


def tiny_hp(**kw) -> Td3Hyperparams:
    base = dict(hidden_dims=(16, 8), batch_size=4, warmup_steps=6,
                buffer_capacity=64, episodes=3, steps_per_episode=4)
    base.update(kw)
    return Td3Hyperparams(**base)


def make_agent(seed=0, **kw) -> Td3Agent:
    return Td3Agent.create(Normalizer(150, 150, 30, 130, 10.0), tiny_hp(**kw), seed)


def random_batch(rng, n=4):
    states = rng.uniform(-1, 1, (n, 3))
    actions = rng.uniform(-0.5, 0.5, (n, 3))
    rewards = rng.uniform(0, 2, n)
    next_states = rng.uniform(-1, 1, (n, 3))
    return states, actions, rewards, next_states


class TestNormalizer:
    def test_state_round_trip_center(self):
        n = Normalizer(150, 150, 30, 130, 10.0)
        assert np.allclose(n.norm_state([75, 75, 80]), [0, 0, 0])
        assert np.allclose(n.norm_state([0, 150, 30]), [-1, 1, -1])

    def test_out_of_area_clips(self):
        n = Normalizer(150, 150, 30, 130, 10.0)
        assert np.allclose(n.norm_state([-40, 500, 80]), [-1, 1, 0])

    def test_action_round_trip(self):
        n = Normalizer(150, 150, 30, 130, 10.0)
        a = np.array([3.0, -4.0, 1.0])
        assert np.allclose(n.denorm_action(n.norm_action(a)), a)


class TestReplayBuffer:
    def test_ring_eviction(self):
        buf = ReplayBuffer(3, seed=0)
        for k in range(5):
            buf.add(Transition(np.full(3, 0.1), np.zeros(3), float(k), np.zeros(3)))
        assert len(buf) == 3
        assert set(buf._rewards.tolist()) == {2.0, 3.0, 4.0}

    def test_rejects_nonfinite(self):
        buf = ReplayBuffer(3, seed=0)
        with pytest.raises(InvalidInputError):
            buf.add(Transition(np.full(3, np.nan), np.zeros(3), 0.0, np.zeros(3)))

    def test_sampling_uniformity_chi_squared(self):
        cap = 50
        buf = ReplayBuffer(cap, seed=7)
        for k in range(cap):
            buf.add(Transition(np.zeros(3), np.zeros(3), float(k), np.zeros(3)))
        draws = 100_000
        counts = np.zeros(cap)
        for _ in range(100):
            _, _, rewards, _ = buf.sample(1000)
            for r in rewards:
                counts[int(r)] += 1
        expected = draws / cap
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        assert chi2 < stats.chi2.ppf(0.99, df=cap - 1)

    def test_empty_buffer_rejected(self):
        with pytest.raises(InvalidInputError):
            ReplayBuffer(4, seed=0).sample(2)


class TestSelectAction:
    def test_deterministic_without_exploration(self):
        agent = make_agent(3)
        s = np.array([0.2, -0.1, 0.4])
        a1 = td3.select_action(agent, s, explore=False)
        a2 = td3.select_action(agent, s, explore=False)
        assert np.array_equal(a1.displacement, a2.displacement)

    def test_zero_noise_matches_deterministic(self):
        agent = make_agent(4, exploration_noise_std=0.0)
        s = np.array([0.2, -0.1, 0.4])
        det = td3.select_action(agent, s, explore=False)
        noisy = td3.select_action(agent, s, explore=True)
        assert np.allclose(det.displacement, noisy.displacement)

    def test_action_within_ball(self):
        agent = make_agent(5, exploration_noise_std=0.8)
        rng = np.random.default_rng(0)
        for _ in range(200):
            s = rng.uniform(-1, 1, 3)
            a = td3.select_action(agent, s, explore=True)
            assert np.linalg.norm(a.displacement) <= 10.0 + 1e-9

    def test_noise_standard_deviation(self):
        agent = make_agent(6, exploration_noise_std=0.05)
        # zero out the actor so the noise is isolated, well inside the ball
        for w in agent.actor.weights:
            w[:] = 0.0
        for b in agent.actor.biases:
            b[:] = 0.0
        s = np.zeros(3)
        draws = np.array([td3.select_action(agent, s, explore=True).displacement
                          for _ in range(10_000)])
        measured = draws.std(axis=0) / 10.0  # back to normalized units
        assert np.all(np.abs(measured - 0.05) < 0.05 * 0.05)

    def test_warmup_action_inside_ball(self):
        agent = make_agent(7)
        for _ in range(100):
            a = td3.random_action(agent)
            assert np.linalg.norm(a.displacement) <= 10.0 + 1e-9


class TestCriticUpdate:
    def test_zero_discount_targets_reward_only(self):
        agent = make_agent(8, discount=1e-12, target_noise_std=0.0)
        rng = np.random.default_rng(1)
        batch = random_batch(rng)
        states, actions, rewards, _ = batch
        q_before = neural.forward(agent.critic1, np.concatenate([states, actions], axis=1))[:, 0]
        expected_loss = float(np.mean((q_before - rewards) ** 2))
        loss1, _ = td3.critic_update(agent, batch)
        assert loss1 == pytest.approx(expected_loss, rel=1e-6)

    def test_identical_critic_targets_min_is_first(self):
        agent = make_agent(9, target_noise_std=0.0)
        agent.critic2_target = neural.clone_net(agent.critic1_target)
        rng = np.random.default_rng(2)
        states, actions, rewards, next_states = random_batch(rng)
        next_a = neural.forward(agent.actor_target, next_states)
        next_a = next_a / np.maximum(np.linalg.norm(next_a, axis=1, keepdims=True), 1.0)
        q1t = neural.forward(agent.critic1_target,
                             np.concatenate([next_states, next_a], axis=1))[:, 0]
        y = rewards + agent.hp.discount * q1t
        q = neural.forward(agent.critic1, np.concatenate([states, actions], axis=1))[:, 0]
        expected_loss = float(np.mean((q - y) ** 2))
        loss1, _ = td3.critic_update(agent, (states, actions, rewards, next_states))
        assert loss1 == pytest.approx(expected_loss, rel=1e-6)

    def test_hand_built_two_transition_loss(self):
        # frozen tiny nets, zero smoothing noise: the loss is a short formula
        agent = make_agent(10, target_noise_std=0.0, discount=0.5)
        batch = (np.array([[0.1, 0.2, 0.3], [-0.2, 0.0, 0.4]]),
                 np.array([[0.1, 0.0, 0.0], [0.0, 0.2, 0.0]]),
                 np.array([1.0, 2.0]),
                 np.array([[0.0, 0.1, 0.0], [0.3, -0.1, 0.2]]))
        states, actions, rewards, next_states = batch
        a2 = neural.forward(agent.actor_target, next_states)
        a2 = a2 / np.maximum(np.linalg.norm(a2, axis=1, keepdims=True), 1.0)
        nin = np.concatenate([next_states, a2], axis=1)
        y = rewards + 0.5 * np.minimum(
            neural.forward(agent.critic1_target, nin)[:, 0],
            neural.forward(agent.critic2_target, nin)[:, 0])
        sin = np.concatenate([states, actions], axis=1)
        manual1 = float(np.mean((neural.forward(agent.critic1, sin)[:, 0] - y) ** 2))
        manual2 = float(np.mean((neural.forward(agent.critic2, sin)[:, 0] - y) ** 2))
        loss1, loss2 = td3.critic_update(agent, batch)
        assert loss1 == pytest.approx(manual1, rel=1e-9)
        assert loss2 == pytest.approx(manual2, rel=1e-9)

    def test_clipped_double_q_bound(self):
        agent = make_agent(11, target_noise_std=0.0)
        rng = np.random.default_rng(3)
        states, actions, rewards, next_states = random_batch(rng)
        next_a = neural.forward(agent.actor_target, next_states)
        next_a = next_a / np.maximum(np.linalg.norm(next_a, axis=1, keepdims=True), 1.0)
        nin = np.concatenate([next_states, next_a], axis=1)
        q1t = neural.forward(agent.critic1_target, nin)[:, 0]
        q2t = neural.forward(agent.critic2_target, nin)[:, 0]
        y = rewards + agent.hp.discount * np.minimum(q1t, q2t)
        assert np.all(y <= rewards + agent.hp.discount * q1t + 1e-12)
        assert np.all(y <= rewards + agent.hp.discount * q2t + 1e-12)

    def test_targets_untouched_by_critic_update(self):
        agent = make_agent(12)
        frozen = [w.copy() for w in agent.critic1_target.weights]
        rng = np.random.default_rng(4)
        for _ in range(3):
            td3.critic_update(agent, random_batch(rng))
        assert all(np.array_equal(a, b) for a, b in zip(frozen, agent.critic1_target.weights))


class TestActorUpdate:
    def test_constant_critic_gives_zero_gradient(self):
        agent = make_agent(13)
        for w in agent.critic1.weights:
            w[:] = 0.0
        for b in agent.critic1.biases:
            b[:] = 0.0
        agent.critic1.biases[-1][0] = 3.0
        before = [w.copy() for w in agent.actor.weights]
        td3.actor_update(agent, (np.random.default_rng(5).uniform(-1, 1, (4, 3)),
                                 None, None, None))
        assert all(np.array_equal(a, b) for a, b in zip(before, agent.actor.weights))

    def test_ascends_synthetic_bowl(self):
        # critic1 wired to Q(s, a) = -sum_k |a_k - a*_k| via paired relus
        agent = make_agent(14)
        astar = np.array([0.4, -0.2, 0.3])
        w0 = np.zeros((6, 16))
        b0 = np.zeros(16)
        for k in range(3):
            w0[3 + k, 2 * k] = 1.0
            b0[2 * k] = -astar[k]
            w0[3 + k, 2 * k + 1] = -1.0
            b0[2 * k + 1] = astar[k]
        w1 = np.zeros((16, 8))
        b1 = np.zeros(8)
        w1[:6, 0] = 1.0
        b1[1] = 1.0
        w2 = np.zeros((8, 1))
        w2[0, 0] = -1.0
        agent.critic1 = neural.DenseNet((6, 16, 8, 1), [w0, w1, w2], [b0, b1, np.zeros(1)])
        agent.adam_actor = neural.init_adam(agent.actor, 1e-2)
        states = np.zeros((8, 3))
        for _ in range(2500):
            td3.actor_update(agent, (states, None, None, None))
        out = neural.forward(agent.actor, np.zeros(3))
        assert np.linalg.norm(out - astar) < 0.05

    def test_critics_untouched_by_actor_update(self):
        agent = make_agent(15)
        frozen = [w.copy() for w in agent.critic1.weights + agent.critic2.weights]
        td3.actor_update(agent, (np.zeros((4, 3)), None, None, None))
        current = agent.critic1.weights + agent.critic2.weights
        assert all(np.array_equal(a, b) for a, b in zip(frozen, current))


class TestDelayContract:
    def test_actor_unchanged_after_odd_updates(self):
        agent = make_agent(16, policy_delay=2)
        rng = np.random.default_rng(6)
        before = [w.copy() for w in agent.actor.weights]
        td3.update(agent, random_batch(rng))  # 1 critic update: no actor step
        assert all(np.array_equal(a, b) for a, b in zip(before, agent.actor.weights))
        td3.update(agent, random_batch(rng))  # 2nd: actor and targets move
        assert not all(np.array_equal(a, b) for a, b in zip(before, agent.actor.weights))

    def test_exact_update_ratio(self):
        agent = make_agent(17, policy_delay=3)
        rng = np.random.default_rng(7)
        for _ in range(12):
            td3.update(agent, random_batch(rng))
        assert agent.critic_updates == 12
        assert agent.actor_updates == 4

    def test_targets_move_only_with_actor(self):
        agent = make_agent(18, policy_delay=2)
        rng = np.random.default_rng(8)
        frozen = [w.copy() for w in agent.actor_target.weights]
        td3.update(agent, random_batch(rng))
        assert all(np.array_equal(a, b) for a, b in zip(frozen, agent.actor_target.weights))
        td3.update(agent, random_batch(rng))
        assert not all(np.array_equal(a, b) for a, b in zip(frozen, agent.actor_target.weights))


class TestTrainLoop:
    def _env(self):
        env = Environment(EnvConfig(mc_samples=40, uav_n_side=4, sbs_n_side=2,
                                    m_s_min=2, m_s_max=2, clamp_horizontal=True),
                          ChannelParams())
        env.reset(0)
        return env

    def test_zero_learning_rates_freeze_parameters(self):
        env = self._env()
        hp = tiny_hp(actor_lr=0.0, critic_lr=0.0)
        agent = Td3Agent.create(Normalizer(150, 150, 30, 130, 10.0), hp, 21)
        before = [w.copy() for w in agent.actor.weights + agent.critic1.weights]
        td3.train(env, agent, hp)
        after = agent.actor.weights + agent.critic1.weights
        assert all(np.array_equal(a, b) for a, b in zip(before, after))

    def test_fixed_seed_reproduces_reward_series(self):
        series = []
        for _ in range(2):
            env = self._env()
            agent = Td3Agent.create(Normalizer(150, 150, 30, 130, 10.0), tiny_hp(), 22)
            _, logs = td3.train(env, agent, tiny_hp())
            series.append([lg.reward for lg in logs])
        assert series[0] == series[1]

    def test_episode_count_and_log_shape(self):
        env = self._env()
        hp = tiny_hp(episodes=5)
        agent = Td3Agent.create(Normalizer(150, 150, 30, 130, 10.0), hp, 23)
        _, logs = td3.train(env, agent, hp)
        assert [lg.episode for lg in logs] == list(range(5))
        assert all(lg.steps == hp.steps_per_episode for lg in logs)


class TestGreedyRollout:
    def test_zero_actor_is_stationary(self):
        env = Environment(EnvConfig(mc_samples=30, uav_n_side=4, sbs_n_side=2,
                                    m_s_min=2, m_s_max=2), ChannelParams())
        env.reset(1)
        agent = make_agent(24)
        for w in agent.actor.weights:
            w[:] = 0.0
        for b in agent.actor.biases:
            b[:] = 0.0
        trace = td3.greedy_rollout(env, agent, 5)
        assert len(trace) == 6
        for pt in trace:
            assert np.array_equal(pt.position, trace[0].position)

    def test_rollout_deterministic(self):
        traces = []
        for _ in range(2):
            env = Environment(EnvConfig(mc_samples=30, uav_n_side=4, sbs_n_side=2,
                                        m_s_min=2, m_s_max=2), ChannelParams())
            env.reset(2)
            agent = make_agent(25)
            trace = td3.greedy_rollout(env, agent, 6)
            traces.append([tuple(pt.position) for pt in trace])
        assert traces[0] == traces[1]

    def test_time_column_is_cumulative_and_bounded(self):
        env = Environment(EnvConfig(mc_samples=30, uav_n_side=4, sbs_n_side=2,
                                    m_s_min=2, m_s_max=2), ChannelParams())
        env.reset(3)
        agent = make_agent(26)
        trace = td3.greedy_rollout(env, agent, 10)
        times = [pt.time for pt in trace]
        assert times == sorted(times)
        assert times[-1] <= 10 * 10.0 / 8.0 + 1e-9
