"""Agents: Bellman targets, twin-min, temperature tuning, Polyak, training loop."""

import copy

import numpy as np
import pytest

from wcsee_lab.agents import (
    AgentConfig,
    DdpgAgent,
    SacAgent,
    TrainSchedule,
    polyak,
    train,
)
from wcsee_lab.channels import RngStream
from wcsee_lab.env import SecureDownlinkEnv, action_dim, state_dim
from wcsee_lab.neural import Mlp, mlp_forward


def tiny_agent(state_dim=3, action_dim=2, seed=0, **over) -> SacAgent:
    cfg = AgentConfig(state_dim=state_dim, action_dim=action_dim, hidden=(16, 16), **over)
    return SacAgent(cfg, seed=seed)


def random_batch(rng, n, s_dim, a_dim, reward=None, done=0.0):
    return {
        "states": rng.standard_normal((n, s_dim)),
        "actions": np.tanh(rng.standard_normal((n, a_dim))),
        "rewards": np.full(n, reward) if reward is not None else rng.standard_normal(n),
        "next_states": rng.standard_normal((n, s_dim)),
        "dones": np.full(n, done),
    }


def zero_network(net: Mlp, bias_out=0.0):
    for w in net.weights:
        w[...] = 0.0
    for b in net.biases:
        b[...] = 0.0
    net.biases[-1][...] = bias_out


class TestCriticTarget:
    def test_zero_discount_returns_reward(self):
        agent = tiny_agent(gamma=0.0)
        batch = random_batch(RngStream(0).generator, 8, 3, 2, reward=1.5)
        np.testing.assert_allclose(
            agent.critic_target(batch, RngStream(1).generator), np.full(8, 1.5), atol=1e-12
        )

    def test_terminal_flag_cuts_bootstrap(self):
        agent = tiny_agent()
        batch = random_batch(RngStream(2).generator, 8, 3, 2, reward=0.7, done=1.0)
        np.testing.assert_allclose(
            agent.critic_target(batch, RngStream(3).generator), np.full(8, 0.7), atol=1e-12
        )

    def test_identical_twins_match_single_critic_formula(self):
        agent = tiny_agent(seed=4)
        agent.q2_target = copy.deepcopy(agent.q1_target)
        batch = random_batch(RngStream(5).generator, 6, 3, 2)
        rng_state = RngStream(6)
        y = agent.critic_target(batch, rng_state.generator)
        a2, lp2 = agent.sample_with_log_prob(batch["next_states"], RngStream(6).generator)
        x2 = np.concatenate([batch["next_states"], a2], axis=-1)
        q = mlp_forward(agent.q1_target, x2)[:, 0]
        expected = batch["rewards"] + agent.cfg.gamma * (q - agent.beta * lp2)
        np.testing.assert_allclose(y, expected, atol=1e-12)

    def test_min_selects_the_lower_target(self):
        agent = tiny_agent(seed=7, gamma=1.0, init_temperature=1e-12)
        zero_network(agent.q1_target, bias_out=4.0)
        zero_network(agent.q2_target, bias_out=-3.0)
        batch = random_batch(RngStream(8).generator, 5, 3, 2, reward=0.0)
        y = agent.critic_target(batch, RngStream(9).generator)
        np.testing.assert_allclose(y, np.full(5, -3.0), atol=1e-6)


class TestCriticUpdate:
    def test_exact_fit_has_zero_loss_and_moves_nothing(self):
        agent = tiny_agent(gamma=0.0)
        zero_network(agent.q1, bias_out=2.0)
        zero_network(agent.q2, bias_out=2.0)
        batch = random_batch(RngStream(10).generator, 8, 3, 2, reward=2.0)
        before = [p.copy() for p in agent.q1.params()]
        l1, l2 = agent.critic_update(batch, RngStream(11).generator)
        assert l1 == 0.0 and l2 == 0.0
        for a, b in zip(before, agent.q1.params()):
            np.testing.assert_array_equal(a, b)

    def test_loss_decreases_on_frozen_batch(self):
        # Refreshing the same noise stream per call freezes the Bellman
        # target, so the regression loss must shrink.
        agent = tiny_agent(seed=12)
        batch = random_batch(RngStream(13).generator, 32, 3, 2)
        first = agent.critic_update(batch, RngStream(14).generator)
        for _ in range(98):
            agent.critic_update(batch, RngStream(14).generator)
        last = agent.critic_update(batch, RngStream(14).generator)
        assert last[0] < first[0]
        assert last[1] < first[1]

    def test_targets_untouched_by_critic_update(self):
        agent = tiny_agent(seed=15)
        before = [p.copy() for p in agent.q1_target.params() + agent.q2_target.params()]
        agent.critic_update(random_batch(RngStream(16).generator, 16, 3, 2), RngStream(17).generator)
        after = agent.q1_target.params() + agent.q2_target.params()
        for a, b in zip(before, after):
            np.testing.assert_array_equal(a, b)


class TestActorUpdate:
    def test_no_signal_means_no_motion(self):
        # Constant critics and zero temperature: the surrogate is flat.
        agent = tiny_agent(seed=18)
        zero_network(agent.q1, bias_out=1.0)
        zero_network(agent.q2, bias_out=1.0)
        agent.log_beta[...] = -np.inf  # beta = 0 exactly
        before = [p.copy() for p in agent.actor.params()]
        agent.actor_update(random_batch(RngStream(19).generator, 16, 3, 2), RngStream(20).generator)
        for a, b in zip(before, agent.actor.params()):
            np.testing.assert_array_equal(a, b)

    def test_critics_untouched_by_actor_update(self):
        agent = tiny_agent(seed=21)
        before = [p.copy() for p in agent.q1.params() + agent.q2.params()]
        agent.actor_update(random_batch(RngStream(22).generator, 16, 3, 2), RngStream(23).generator)
        for a, b in zip(before, agent.q1.params() + agent.q2.params()):
            np.testing.assert_array_equal(a, b)

    def test_bandit_mean_moves_toward_argmax(self):
        # Pretrain the critics on a known landscape Q(s, a) = -(a - 0.5)^2,
        # then check the squashed policy mean migrates toward 0.5.
        agent = tiny_agent(state_dim=1, action_dim=1, seed=24, lr_actor=3e-3, init_temperature=1e-3)
        rng = RngStream(25)
        g = rng.generator
        for _ in range(800):
            s = g.standard_normal((64, 1))
            a = g.uniform(-0.999, 0.999, (64, 1))
            y = -((a - 0.5) ** 2)
            batch = {"states": s, "actions": a}
            x = np.concatenate([s, a], axis=-1)
            for net, opt in ((agent.q1, agent.opt_q1), (agent.q2, agent.opt_q2)):
                from wcsee_lab import neural

                params = neural.wrap_params(net)
                q = neural.mlp_forward_graph(neural.constant(x), params)
                loss = neural.mean(neural.square(neural.sub(q, neural.constant(y))))
                opt.step(neural.gradients(loss, params))
        states = np.zeros((64, 1))
        start = float(np.tanh(agent._policy_heads(np.zeros((1, 1)))[0][0, 0]))
        for _ in range(1000):
            batch = {"states": states}
            agent.actor_update({"states": states}, g)
        end = float(np.tanh(agent._policy_heads(np.zeros((1, 1)))[0][0, 0]))
        assert abs(end - 0.5) < abs(start - 0.5)
        assert abs(end - 0.5) < 0.15


class TestTemperature:
    def test_stationary_at_matched_entropy(self):
        agent = tiny_agent()
        before = agent.beta
        # Realized log-probs exactly at minus the target entropy: zero gradient.
        agent.temperature_update(np.full(32, -agent.cfg.entropy_floor))
        assert agent.beta == pytest.approx(before, abs=1e-12)

    def test_overly_deterministic_policy_raises_beta(self):
        agent = tiny_agent()
        before = agent.beta
        agent.temperature_update(np.full(32, 50.0))  # very high log densities
        assert agent.beta > before

    def test_overly_random_policy_lowers_beta(self):
        agent = tiny_agent()
        before = agent.beta
        agent.temperature_update(np.full(32, -50.0))
        assert agent.beta < before

    def test_beta_stays_positive_over_long_runs(self):
        agent = tiny_agent()
        g = RngStream(26).generator
        for _ in range(10_000):
            agent.temperature_update(g.standard_normal(8) * 10.0)
            assert agent.beta > 0.0


class TestPolyak:
    def test_tau_one_is_hard_copy(self):
        t = [np.zeros((2, 2))]
        o = [np.arange(4.0).reshape(2, 2)]
        polyak(t, o, 1.0)
        np.testing.assert_array_equal(t[0], o[0])

    def test_tau_zero_is_identity(self):
        t = [np.ones(3)]
        o = [np.full(3, 7.0)]
        polyak(t, o, 0.0)
        np.testing.assert_array_equal(t[0], np.ones(3))

    def test_geometric_decay_toward_frozen_online(self):
        tau = 5e-3
        t = [np.array([0.0])]
        o = [np.array([1.0])]
        for _ in range(139):  # ~ln 2 / tau halves the gap
            polyak(t, o, tau)
        gap = 1.0 - t[0][0]
        assert gap == pytest.approx((1 - tau) ** 139, rel=1e-9)
        assert gap == pytest.approx(0.5, abs=0.02)

    def test_target_replays_exact_recursion(self):
        agent = tiny_agent(seed=27)
        shadow = [p.copy() for p in agent.q1_target.params()]
        histories = []
        rng = RngStream(28).generator
        for _ in range(5):
            agent.critic_update(random_batch(RngStream(29).generator, 8, 3, 2), rng)
            agent.polyak_update()
            histories.append([p.copy() for p in agent.q1.params()])
        for online in histories:
            for s, o in zip(shadow, online):
                s *= 1 - agent.cfg.tau
                s += agent.cfg.tau * o
        for s, t in zip(shadow, agent.q1_target.params()):
            np.testing.assert_allclose(s, t, atol=1e-15)


class TestTraining:
    def _env(self, desk_cfg, **kw):
        cfg = desk_cfg(num_ihr=2, num_uehr=1, n_t=2, m_ris=2, bits=2)
        return cfg, SecureDownlinkEnv(cfg, horizon=10, **kw)

    def test_fixed_seed_identical_curves(self, desk_cfg):
        def run():
            cfg, env = self._env(desk_cfg, seed=30)
            agent = SacAgent(
                AgentConfig(state_dim=state_dim(cfg), action_dim=action_dim(cfg), hidden=(16, 16)),
                seed=31,
            )
            sched = TrainSchedule(episodes=4, warmup_steps=15, batch_size=8, seed=32)
            return [row.as_tuple() for row in train(env, agent, sched).curve]

        assert run() == run()

    def test_zero_gradient_steps_is_pure_rollout(self, desk_cfg):
        cfg, env = self._env(desk_cfg, seed=33)
        agent = SacAgent(
            AgentConfig(state_dim=state_dim(cfg), action_dim=action_dim(cfg), hidden=(8, 8)),
            seed=34,
        )
        before = [p.copy() for p in agent.parameter_arrays()]
        sched = TrainSchedule(episodes=3, warmup_steps=5, batch_size=8, seed=35,
                              grad_steps_per_env_step=0.0)
        result = train(env, agent, sched)
        assert len(result.curve) == 3
        for a, b in zip(before, agent.parameter_arrays()):
            np.testing.assert_array_equal(a, b)

    def test_ddpg_trains_and_decays_noise(self, desk_cfg):
        cfg, env = self._env(desk_cfg, seed=36)
        agent = DdpgAgent(
            AgentConfig(state_dim=state_dim(cfg), action_dim=action_dim(cfg), hidden=(8, 8)),
            seed=37,
        )
        sched = TrainSchedule(episodes=3, warmup_steps=5, batch_size=8, seed=38)
        train(env, agent, sched)
        assert agent.noise_scale == pytest.approx(0.01)

    def test_ddpg_zero_noise_zero_net_is_constant_policy(self):
        agent = DdpgAgent(AgentConfig(state_dim=3, action_dim=2, hidden=(4, 4)), seed=39,
                          noise_scale=0.0)
        zero_network(agent.actor)
        a1 = agent.act(np.ones(3), None)
        a2 = agent.act(-np.ones(3), None)
        np.testing.assert_array_equal(a1, np.zeros(2))
        np.testing.assert_array_equal(a1, a2)

    def test_checkpoint_round_trip_preserves_policy(self, tmp_path, desk_cfg):
        cfg, env = self._env(desk_cfg, seed=40)
        agent = SacAgent(
            AgentConfig(state_dim=state_dim(cfg), action_dim=action_dim(cfg), hidden=(8, 8)),
            seed=41,
        )
        train(env, agent, TrainSchedule(episodes=2, warmup_steps=5, batch_size=8, seed=42))
        state = env.reset()
        expected = agent.act(state, None, greedy=True)
        path = tmp_path / "agent.ckpt"
        agent.save(path)
        clone = SacAgent(agent.cfg, seed=999)
        clone.load(path)
        np.testing.assert_array_equal(clone.act(state, None, greedy=True), expected)
