import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from uavthz.channel import ChannelParams
from uavthz.environment import (EnvAction, EnvConfig, Environment, Topology,
                                outage_to_reward, project_action)
from uavthz.errors import InvalidInputError
from uavthz.geometry import vec3


def small_env(**kw) -> Environment:
    # cheap Monte-Carlo and small arrays keep steps fast
    cfg = EnvConfig(mc_samples=60, uav_n_side=4, sbs_n_side=2, **kw)
    return Environment(cfg, ChannelParams())


class TestReset:
    def test_fixed_seed_reproduces_topology(self):
        a, b = small_env(), small_env()
        _, ta = a.reset(7)
        _, tb = b.reset(7)
        assert np.array_equal(ta.positions(), tb.positions())
        assert a.change_interval == b.change_interval

    def test_station_count_pinned_range(self):
        env = small_env(m_s_min=4, m_s_max=4)
        for seed in range(12):
            _, topo = env.reset(seed)
            assert len(topo.sbs_list) == 4

    def test_first_call_starts_at_area_center(self):
        env = small_env()
        state, _ = env.reset(0)
        assert np.allclose(state.uav_position, (75.0, 75.0, 80.0))

    def test_position_carries_across_epochs(self):
        env = small_env()
        env.reset(0)
        env.step(EnvAction(vec3(4.0, -3.0, 2.0)))
        moved = env.state.uav_position.copy()
        state, _ = env.reset(1)
        assert np.array_equal(state.uav_position, moved)

    def test_uniform_placement_statistics(self):
        env = small_env()
        xs = []
        for seed in range(400):
            env.topology = None
            env.config.freeze_topology = False
            _, topo = env.reset(seed)
            xs.extend(topo.positions()[:, 0])
        xs = np.array(xs)
        # mean of U(0,150) is 75 with sigma = 150/sqrt(12)
        bound = 3 * (150 / np.sqrt(12)) / np.sqrt(len(xs))
        assert abs(xs.mean() - 75.0) < bound

    def test_interval_drawn_within_bounds(self):
        env = small_env()
        for seed in range(10):
            env.topology = None
            env.reset(seed)
            assert 20.0 <= env.change_interval <= 35.0

    def test_freeze_topology_keeps_stations(self):
        env = small_env(freeze_topology=True)
        _, t0 = env.reset(0)
        _, t1 = env.reset(99)
        assert np.array_equal(t0.positions(), t1.positions())


class TestStep:
    def test_altitude_violation_is_full_rejection(self):
        env = small_env()
        env.reset(0)
        for _ in range(5):
            env.step(EnvAction(vec3(0.0, 0.0, 9.9)))  # climb to just under the ceiling
        before = env.state.uav_position.copy()
        assert before[2] > 125.0
        res = env.step(EnvAction(vec3(1.0, 2.0, 9.0)))  # breaches h_max: full no-op
        assert np.array_equal(res.next_state.uav_position, before)
        assert res.elapsed == 0.0

    def test_z_only_clamp_variant(self):
        env = small_env(clamp_z_only=True)
        env.reset(0)
        res = env.step(EnvAction(vec3(0.0, 0.0, 10.0)))
        for _ in range(6):
            res = env.step(EnvAction(vec3(0.0, 3.0, 9.5)))
        assert res.next_state.uav_position[2] == 130.0
        assert res.next_state.uav_position[1] > 75.0

    def test_zero_action_keeps_position_and_time(self):
        env = small_env()
        env.reset(3)
        before = env.state.uav_position.copy()
        res = env.step(EnvAction(vec3(0.0, 0.0, 0.0)))
        assert np.array_equal(res.next_state.uav_position, before)
        assert res.elapsed == 0.0

    def test_action_magnitude_projection(self):
        assert np.linalg.norm(project_action(vec3(30.0, 0.0, 0.0), 10.0)) == pytest.approx(10.0)
        small = project_action(vec3(1.0, 2.0, -1.0), 10.0)
        assert np.array_equal(small, vec3(1.0, 2.0, -1.0))

    def test_elapsed_charges_peak_speed(self):
        env = small_env()
        env.reset(0)
        res = env.step(EnvAction(vec3(8.0, 0.0, 0.0)))
        assert res.elapsed == pytest.approx(1.0)

    def test_horizontal_clamp_flag(self):
        env = small_env(clamp_horizontal=True)
        env.reset(0)
        env._uav_position = vec3(149.0, 75.0, 80.0)
        res = env.step(EnvAction(vec3(9.0, 0.0, 0.0)))
        assert res.next_state.uav_position[0] == 150.0

    def test_determinism_same_seed_same_actions(self):
        actions = [EnvAction(vec3(2, 1, -1)), EnvAction(vec3(-3, 4, 2)), EnvAction(vec3(0, 0, 5))]
        outs = []
        for _ in range(2):
            env = small_env()
            env.reset(11)
            rows = [env.step(a) for a in actions]
            outs.append([(r.reward, tuple(r.outage.per_link_outage)) for r in rows])
        assert outs[0] == outs[1]

    @given(st.lists(st.tuples(st.floats(-12, 12), st.floats(-12, 12), st.floats(-12, 12)),
                    min_size=1, max_size=15))
    @settings(max_examples=25, deadline=None)
    def test_altitude_always_in_envelope(self, moves):
        env = small_env()
        env.reset(5)
        for mv in moves:
            env.step(EnvAction(vec3(*mv)))
        z = env.state.uav_position[2]
        assert 30.0 <= z <= 130.0


class TestReward:
    def test_log_reward_example(self):
        assert outage_to_reward(np.exp(-2.0)) == pytest.approx(2.0)

    def test_floor_bounds_reward(self):
        assert outage_to_reward(0.0, 1e-9) == pytest.approx(-np.log(1e-9))
        assert outage_to_reward(1.0) == 0.0

    @given(st.floats(1e-12, 1.0), st.floats(1e-12, 1.0))
    def test_lower_outage_is_strictly_better(self, a, b):
        ra, rb = outage_to_reward(a), outage_to_reward(b)
        if max(a, 1e-9) < max(b, 1e-9):
            assert ra > rb

    def test_reward_range_invariant(self):
        env = small_env()
        env.reset(0)
        for _ in range(5):
            res = env.step(EnvAction(vec3(3, -2, 1)))
            assert 0.0 <= res.reward <= -np.log(1e-9)


class TestEvolveTopology:
    def test_no_change_when_disabled_and_full(self):
        # no disconnects allowed and no free slots: evolution is the identity
        env = small_env(m_s_min=3, m_s_max=3, m_d_max=0)
        _, topo = env.reset(0)
        out = env.evolve_topology(topo, np.random.default_rng(0))
        assert np.array_equal(out.positions(), topo.positions())

    def test_full_replacement_keeps_validity(self):
        env = small_env(m_s_min=2, m_s_max=3, m_d_max=3)
        _, topo = env.reset(1)
        rng = np.random.default_rng(42)
        for _ in range(50):
            topo = env.evolve_topology(topo, rng)
            assert 1 <= len(topo.sbs_list) <= 3
            for lk in topo.sbs_list:
                x, y, z = lk.sbs_position
                assert 0 <= x <= 150 and 0 <= y <= 150 and z == 0

    def test_never_exceeds_station_cap(self):
        env = small_env(m_s_min=5, m_s_max=5, m_d_max=2)
        _, topo = env.reset(2)
        rng = np.random.default_rng(7)
        for _ in range(100):
            topo = env.evolve_topology(topo, rng)
            assert len(topo.sbs_list) <= 5

    def test_disconnect_count_distribution(self):
        env = small_env(m_s_min=5, m_s_max=5, m_d_max=2)
        _, topo = env.reset(3)
        rng = np.random.default_rng(11)
        counts = {0: 0, 1: 0, 2: 0}
        trials = 4000
        for _ in range(trials):
            out = env.evolve_topology(topo, rng)
            # removed = 5 - survivors; fresh stations are appended after survivors
            survivors = sum(any(np.array_equal(lk.sbs_position, orig.sbs_position)
                                for orig in topo.sbs_list) for lk in out.sbs_list)
            counts[5 - survivors] += 1
        chi2 = sum((c - trials / 3) ** 2 / (trials / 3) for c in counts.values())
        assert chi2 < stats.chi2.ppf(0.99, df=2)

    def test_empty_topology_rejected(self):
        env = small_env()
        env.reset(0)
        with pytest.raises(InvalidInputError):
            Topology([], 150, 150)


class TestEpisodeTime:
    def test_ten_steps_of_ten_meters(self):
        env = small_env()
        env.reset(0)
        actions = [EnvAction(vec3(10.0, 0.0, 0.0))] * 10
        total, ok = env.episode_time(actions)
        assert total == pytest.approx(12.5)
        assert ok  # 12.5 <= 27.5

    def test_empty_sequence(self):
        env = small_env()
        env.reset(0)
        assert env.episode_time([]) == (0.0, True)

    def test_peak_speed_accounting(self):
        env = small_env()
        env.reset(0)
        actions = [EnvAction(vec3(0.0, 8.0, 0.0))] * 3
        total, _ = env.episode_time(actions)
        assert total == pytest.approx(3.0)

    def test_budget_violation_flagged(self):
        env = small_env()
        env.reset(0)
        actions = [EnvAction(vec3(10.0, 0.0, 0.0))] * 30
        total, ok = env.episode_time(actions)
        assert total == pytest.approx(37.5)
        assert not ok


class TestRestartEpisode:
    def test_returns_to_epoch_start(self):
        env = small_env()
        start, _ = env.reset(0)
        env.step(EnvAction(vec3(5, 5, 5)))
        env.step(EnvAction(vec3(5, -5, 5)))
        back = env.restart_episode()
        assert np.array_equal(back.uav_position, start.uav_position)

    def test_epoch_start_moves_with_new_epoch(self):
        env = small_env()
        env.reset(0)
        env.step(EnvAction(vec3(5, 5, 5)))
        moved = env.state.uav_position.copy()
        env.reset(1)
        assert np.array_equal(env.epoch_start, moved)
