"""Maximum-entropy and deterministic actor-critic agents.

The soft actor-critic keeps twin Q-networks with Polyak-averaged target
copies, a tanh-squashed Gaussian policy, and an automatically tuned
entropy temperature.  The deterministic baseline (DDPG style) uses a tanh
actor with decaying Gaussian exploration noise and a single critic with
target copies of both networks.

Training interleaves one rollout phase and one gradient phase per episode;
after a warmup of uniformly random actions, the number of gradient updates
per episode matches the number of environment steps taken.  Horizon cuts
are time limits rather than failures, so stored transitions always
bootstrap.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .channels import RngStream
from .neural import (
    Adam,
    Mlp,
    ReplayBuffer,
    constant,
    concat,
    gradients,
    load_params,
    mean,
    minimum,
    mlp_forward,
    mlp_forward_graph,
    mul_const,
    save_params,
    scale,
    slice_last,
    square,
    squashed_sample,
    squashed_sample_graph,
    sub,
    sum_last,
    tanh,
    wrap_params,
)


def polyak(target: list[np.ndarray], online: list[np.ndarray], tau: float):
    """In-place soft update: target <- tau * online + (1 - tau) * target."""
    for t, o in zip(target, online):
        t *= 1.0 - tau
        t += tau * o


@dataclass
class AgentConfig:
    state_dim: int
    action_dim: int
    hidden: tuple = (256, 256)
    gamma: float = 0.99
    tau: float = 5e-3
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    lr_temperature: float = 1e-3
    init_temperature: float = 1.0
    target_entropy: float | None = None  # defaults to -action_dim

    @property
    def entropy_floor(self) -> float:
        return -float(self.action_dim) if self.target_entropy is None else self.target_entropy


class SacAgent:
    """Twin-critic soft actor-critic with automatic temperature tuning."""

    def __init__(self, cfg: AgentConfig, seed: int = 0):
        self.cfg = cfg
        rng = RngStream(seed)
        s, a, h = cfg.state_dim, cfg.action_dim, list(cfg.hidden)
        self.actor = Mlp.create([s] + h + [2 * a], rng.child("actor").generator)
        self.q1 = Mlp.create([s + a] + h + [1], rng.child("q1").generator)
        self.q2 = Mlp.create([s + a] + h + [1], rng.child("q2").generator)
        self.q1_target = copy.deepcopy(self.q1)
        self.q2_target = copy.deepcopy(self.q2)
        self.log_beta = np.array([math.log(cfg.init_temperature)])
        self.opt_actor = Adam(self.actor.params(), cfg.lr_actor)
        self.opt_q1 = Adam(self.q1.params(), cfg.lr_critic)
        self.opt_q2 = Adam(self.q2.params(), cfg.lr_critic)
        self.opt_beta = Adam([self.log_beta], cfg.lr_temperature)

    # -- policy --------------------------------------------------------------

    @property
    def beta(self) -> float:
        return float(np.exp(self.log_beta[0]))

    def _policy_heads(self, states: np.ndarray):
        out = mlp_forward(self.actor, np.atleast_2d(states))
        a = self.cfg.action_dim
        return out[:, :a], out[:, a:]

    def act(self, state: np.ndarray, rng, greedy: bool = False) -> np.ndarray:
        mean_, log_std = self._policy_heads(state)
        if greedy:
            return np.tanh(mean_)[0]
        action, _, _ = squashed_sample(mean_, log_std, rng)
        return action[0]

    def sample_with_log_prob(self, states: np.ndarray, rng):
        mean_, log_std = self._policy_heads(states)
        action, log_prob, _ = squashed_sample(mean_, log_std, rng)
        return action, log_prob

    # -- updates ---------------------------------------------------------------

    def critic_target(self, batch: dict, rng) -> np.ndarray:
        """y = r + gamma (1 - done) (min_i targetQ_i(s', a') - beta log pi(a'|s'))."""
        a2, lp2 = self.sample_with_log_prob(batch["next_states"], rng)
        x2 = np.concatenate([batch["next_states"], a2], axis=-1)
        q1t = mlp_forward(self.q1_target, x2)[:, 0]
        q2t = mlp_forward(self.q2_target, x2)[:, 0]
        soft = np.minimum(q1t, q2t) - self.beta * lp2
        return batch["rewards"] + self.cfg.gamma * (1.0 - batch["dones"]) * soft

    def critic_update(self, batch: dict, rng) -> tuple[float, float]:
        y = self.critic_target(batch, rng)[:, None]
        x = np.concatenate([batch["states"], batch["actions"]], axis=-1)
        losses = []
        for net, opt in ((self.q1, self.opt_q1), (self.q2, self.opt_q2)):
            params = wrap_params(net)
            q = mlp_forward_graph(constant(x), params)
            loss = mean(scale(square(sub(q, constant(y))), 0.5))
            opt.step(gradients(loss, params))
            losses.append(float(loss.data))
        return losses[0], losses[1]

    def actor_update(self, batch: dict, rng) -> tuple[float, np.ndarray]:
        """One gradient step on the policy; returns (loss, realized log-probs).

        Minimizes E[beta log pi(a|s) - min_i Q_i(s, a)] with the action
        reparameterized, so gradients flow through the squashed head; the
        critics participate in the graph but only the actor moves.
        """
        states = batch["states"]
        xi = rng.standard_normal((states.shape[0], self.cfg.action_dim))
        params = wrap_params(self.actor)
        heads = mlp_forward_graph(constant(states), params)
        a_dim = self.cfg.action_dim
        action, log_prob = squashed_sample_graph(
            slice_last(heads, 0, a_dim), slice_last(heads, a_dim, 2 * a_dim), xi
        )
        x = concat(constant(states), action)
        q1 = mlp_forward_graph(x, wrap_params(self.q1))
        q2 = mlp_forward_graph(x, wrap_params(self.q2))
        q_min = sum_last(minimum(q1, q2))
        loss = mean(sub(scale(log_prob, self.beta), q_min))
        self.opt_actor.step(gradients(loss, params))
        return float(loss.data), log_prob.data

    def temperature_update(self, log_pi: np.ndarray) -> float:
        """Descend J(beta) = E[-beta (log pi + target_entropy)] in log space."""
        err = float(np.mean(log_pi) + self.cfg.entropy_floor)
        grad_log_beta = -self.beta * err
        self.opt_beta.step([np.array([grad_log_beta])])
        return self.beta

    def polyak_update(self):
        polyak(self.q1_target.params(), self.q1.params(), self.cfg.tau)
        polyak(self.q2_target.params(), self.q2.params(), self.cfg.tau)

    def update(self, batch: dict, rng) -> dict:
        c1, c2 = self.critic_update(batch, rng)
        actor_loss, log_pi = self.actor_update(batch, rng)
        beta = self.temperature_update(log_pi)
        self.polyak_update()
        return {"critic_loss": 0.5 * (c1 + c2), "actor_loss": actor_loss, "beta": beta}

    # -- persistence -----------------------------------------------------------

    def parameter_arrays(self) -> list[np.ndarray]:
        return (
            self.actor.params()
            + self.q1.params()
            + self.q2.params()
            + self.q1_target.params()
            + self.q2_target.params()
            + [self.log_beta]
        )

    def save(self, path):
        save_params(path, self.parameter_arrays())

    def load(self, path):
        arrays = load_params(path)
        own = self.parameter_arrays()
        if len(arrays) != len(own):
            raise ValueError("checkpoint does not match this agent's topology")
        for dst, src in zip(own, arrays):
            dst[...] = src


class DdpgAgent:
    """Deterministic actor-critic baseline with Gaussian exploration noise."""

    def __init__(self, cfg: AgentConfig, seed: int = 0, noise_scale: float = 0.1):
        self.cfg = cfg
        rng = RngStream(seed)
        s, a, h = cfg.state_dim, cfg.action_dim, list(cfg.hidden)
        self.actor = Mlp.create([s] + h + [a], rng.child("actor").generator)
        self.critic = Mlp.create([s + a] + h + [1], rng.child("critic").generator)
        self.actor_target = copy.deepcopy(self.actor)
        self.critic_target_net = copy.deepcopy(self.critic)
        self.opt_actor = Adam(self.actor.params(), cfg.lr_actor)
        self.opt_critic = Adam(self.critic.params(), cfg.lr_critic)
        self.noise_scale = noise_scale

    @property
    def beta(self) -> float:
        return 0.0  # no entropy machinery in the deterministic baseline

    def act(self, state: np.ndarray, rng, greedy: bool = False) -> np.ndarray:
        a = np.tanh(mlp_forward(self.actor, np.atleast_2d(state)))[0]
        if greedy or self.noise_scale == 0.0:
            return a
        return np.clip(a + self.noise_scale * rng.standard_normal(a.shape), -1.0, 1.0)

    def critic_target(self, batch: dict, rng=None) -> np.ndarray:
        a2 = np.tanh(mlp_forward(self.actor_target, batch["next_states"]))
        x2 = np.concatenate([batch["next_states"], a2], axis=-1)
        qt = mlp_forward(self.critic_target_net, x2)[:, 0]
        return batch["rewards"] + self.cfg.gamma * (1.0 - batch["dones"]) * qt

    def update(self, batch: dict, rng) -> dict:
        y = self.critic_target(batch)[:, None]
        x = np.concatenate([batch["states"], batch["actions"]], axis=-1)
        params_c = wrap_params(self.critic)
        q = mlp_forward_graph(constant(x), params_c)
        critic_loss = mean(scale(square(sub(q, constant(y))), 0.5))
        self.opt_critic.step(gradients(critic_loss, params_c))

        params_a = wrap_params(self.actor)
        action = tanh(mlp_forward_graph(constant(batch["states"]), params_a))
        qa = mlp_forward_graph(concat(constant(batch["states"]), action), wrap_params(self.critic))
        actor_loss = mean(mul_const(sum_last(qa), -1.0))
        self.opt_actor.step(gradients(actor_loss, params_a))

        polyak(self.actor_target.params(), self.actor.params(), self.cfg.tau)
        polyak(self.critic_target_net.params(), self.critic.params(), self.cfg.tau)
        return {
            "critic_loss": float(critic_loss.data),
            "actor_loss": float(actor_loss.data),
            "beta": 0.0,
        }

    def parameter_arrays(self) -> list[np.ndarray]:
        return (
            self.actor.params()
            + self.critic.params()
            + self.actor_target.params()
            + self.critic_target_net.params()
        )

    def save(self, path):
        save_params(path, self.parameter_arrays())

    def load(self, path):
        arrays = load_params(path)
        own = self.parameter_arrays()
        if len(arrays) != len(own):
            raise ValueError("checkpoint does not match this agent's topology")
        for dst, src in zip(own, arrays):
            dst[...] = src


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainSchedule:
    episodes: int
    warmup_steps: int = 1000
    batch_size: int = 256
    buffer_capacity: int = 100_000
    grad_steps_per_env_step: float = 1.0
    seed: int = 0
    noise_decay_to: float = 0.01  # DDPG exploration floor


@dataclass
class EpisodeRow:
    episode: int
    mean_reward: float
    beta: float
    critic_loss: float
    actor_loss: float

    FIELDS = ("episode", "mean_reward", "beta", "critic_loss", "actor_loss")

    def as_tuple(self):
        return (self.episode, self.mean_reward, self.beta, self.critic_loss, self.actor_loss)


@dataclass
class TrainResult:
    curve: list[EpisodeRow] = field(default_factory=list)
    best_eval_value: float = 0.0
    best_eval_decision: object = None

    @property
    def final_mean_reward(self) -> float:
        tail = self.curve[-10:] if len(self.curve) >= 10 else self.curve
        return float(np.mean([row.mean_reward for row in tail]))


def train(env, agent, schedule: TrainSchedule, evaluate_each_episode: bool = False) -> TrainResult:
    """Rollouts plus gradient phases; returns the per-episode learning curve.

    With ``evaluate_each_episode`` the greedy policy is probed after every
    episode and the best decision it produced (by gated objective value) is
    kept in the result.
    """
    rng = RngStream(schedule.seed)
    act_rng = rng.child("actions").generator
    batch_rng = rng.child("batches").generator
    update_rng = rng.child("updates").generator
    explore_rng = rng.child("explore").generator

    a_dim = agent.cfg.action_dim
    buffer = ReplayBuffer(schedule.buffer_capacity, agent.cfg.state_dim, a_dim)
    result = TrainResult()
    total_steps = 0

    for episode in range(schedule.episodes):
        if isinstance(agent, DdpgAgent) and schedule.episodes > 1:
            frac = episode / (schedule.episodes - 1)
            agent.noise_scale = 0.1 + (schedule.noise_decay_to - 0.1) * frac
        state = env.reset()
        rewards = []
        steps_this_episode = 0
        done = False
        while not done:
            if total_steps < schedule.warmup_steps:
                action = explore_rng.uniform(-1.0, 1.0, a_dim)
            else:
                action = agent.act(state, act_rng)
            reward, next_state, done, _ = env.step(action)
            # Horizon cuts are time limits, not terminal states: always bootstrap.
            buffer.push(state, action, reward, next_state, 0.0)
            state = next_state
            rewards.append(reward)
            total_steps += 1
            steps_this_episode += 1

        critic_loss = actor_loss = 0.0  # stays zero until updates begin
        if total_steps > schedule.warmup_steps and len(buffer) >= schedule.batch_size:
            n_updates = int(round(schedule.grad_steps_per_env_step * steps_this_episode))
            stats = None
            for _ in range(n_updates):
                stats = agent.update(buffer.sample(schedule.batch_size, batch_rng), update_rng)
            if stats is not None:
                critic_loss = stats["critic_loss"]
                actor_loss = stats["actor_loss"]

        result.curve.append(
            EpisodeRow(
                episode=episode,
                mean_reward=float(np.mean(rewards)),
                beta=agent.beta,
                critic_loss=critic_loss,
                actor_loss=actor_loss,
            )
        )
        if evaluate_each_episode:
            value, decision = evaluate_policy(env, agent, episodes=1)
            if value > result.best_eval_value or result.best_eval_decision is None:
                result.best_eval_value = value
                result.best_eval_decision = decision
    return result


def evaluate_policy(env, agent, episodes: int = 1) -> tuple[float, object]:
    """Greedy rollouts; returns the best (gated objective value, decision) seen."""
    best_value = -1.0
    best_decision = None
    for _ in range(episodes):
        state = env.reset()
        done = False
        while not done:
            action = agent.act(state, None, greedy=True)
            reward, state, done, info = env.step(action)
            if reward > best_value:
                best_value = reward
                best_decision = info["decision"]
    return best_value, best_decision
