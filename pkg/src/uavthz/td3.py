"""Twin-delayed deterministic policy gradient agent and its training loop.

Twin critics with clipped double-Q bootstrapping, Gaussian target-policy
smoothing, delayed actor/target updates, a uniform ring replay buffer, and
Gaussian exploration noise. Networks operate in a normalized space: positions
mapped per axis to [-1, 1], actions to the unit ball; denormalization to
meters happens only at the environment boundary.
"""

from dataclasses import dataclass, field

import numpy as np

from uavthz import neural
from uavthz.environment import EnvAction, Environment, outage_to_reward
from uavthz.errors import InvalidInputError
from uavthz.neural import AdamState, DenseNet

STATE_DIM = 3
ACTION_DIM = 3


@dataclass
class Td3Hyperparams:
    hidden_dims: tuple = (256, 128)
    actor_lr: float = 1e-4
    critic_lr: float = 1e-4
    discount: float = 0.9
    tau: float = 0.01
    policy_delay: int = 2
    batch_size: int = 32
    buffer_capacity: int = 1000
    exploration_noise_std: float = 0.1   # fraction of the action scale
    target_noise_std: float = 0.2        # fraction
    target_noise_clip: float = 0.5       # fraction
    warmup_steps: int = 256
    episodes: int = 150
    steps_per_episode: int = 10
    actor_head_scale: float = 0.01       # shrink factor on the actor's output layer init
    reward_scale: float = 0.1            # factor applied to rewards entering the buffer

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise InvalidInputError("discount must lie in (0, 1)")
        if self.policy_delay < 1:
            raise InvalidInputError("policy_delay must be >= 1")
        if self.warmup_steps <= self.batch_size:
            raise InvalidInputError("warmup must exceed the batch size")


@dataclass
class Normalizer:
    """Affine maps between environment coordinates and network coordinates."""

    area_x: float
    area_y: float
    h_min: float
    h_max: float
    action_scale: float

    def norm_state(self, position) -> np.ndarray:
        p = np.asarray(position, dtype=float)
        s = np.empty_like(p)
        s[..., 0] = 2.0 * p[..., 0] / self.area_x - 1.0
        s[..., 1] = 2.0 * p[..., 1] / self.area_y - 1.0
        s[..., 2] = 2.0 * (p[..., 2] - self.h_min) / (self.h_max - self.h_min) - 1.0
        return np.clip(s, -1.0, 1.0)

    def norm_action(self, displacement) -> np.ndarray:
        return np.asarray(displacement, dtype=float) / self.action_scale

    def denorm_action(self, action) -> np.ndarray:
        return np.asarray(action, dtype=float) * self.action_scale


@dataclass
class Transition:
    """One replay record; state/action components are normalized to [-1, 1]."""

    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring storage with uniform random minibatch sampling."""

    def __init__(self, capacity: int, seed: int):
        if capacity < 1:
            raise InvalidInputError("capacity must be >= 1")
        self.capacity = capacity
        self.rng_seed = seed
        self._rng = np.random.default_rng(seed)
        self._states = np.zeros((capacity, STATE_DIM))
        self._actions = np.zeros((capacity, ACTION_DIM))
        self._rewards = np.zeros(capacity)
        self._next_states = np.zeros((capacity, STATE_DIM))
        self._size = 0
        self._cursor = 0

    def __len__(self):
        return self._size

    def add(self, tr: Transition) -> None:
        if not (np.all(np.isfinite(tr.state)) and np.all(np.isfinite(tr.action))
                and np.isfinite(tr.reward) and np.all(np.isfinite(tr.next_state))):
            raise InvalidInputError("non-finite transition")
        i = self._cursor
        self._states[i] = tr.state
        self._actions[i] = tr.action
        self._rewards[i] = tr.reward
        self._next_states[i] = tr.next_state
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int):
        if self._size == 0:
            raise InvalidInputError("cannot sample from an empty buffer")
        idx = self._rng.integers(0, self._size, size=batch_size)
        return (self._states[idx], self._actions[idx],
                self._rewards[idx], self._next_states[idx])


def _project_unit_ball(a: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(a, axis=-1, keepdims=True)
    return np.where(norms > 1.0, a / np.maximum(norms, 1e-12), a)


@dataclass
class Td3Agent:
    """Actor/critic parameter sets, their targets, replay buffer and hyperparameters."""

    actor: DenseNet
    actor_target: DenseNet
    critic1: DenseNet
    critic2: DenseNet
    critic1_target: DenseNet
    critic2_target: DenseNet
    adam_actor: AdamState
    adam_critic1: AdamState
    adam_critic2: AdamState
    buffer: ReplayBuffer
    normalizer: Normalizer
    hp: Td3Hyperparams
    rng: np.random.Generator
    critic_updates: int = 0
    actor_updates: int = 0

    @classmethod
    def create(cls, normalizer: Normalizer, hp: Td3Hyperparams, seed: int) -> "Td3Agent":
        ss = np.random.SeedSequence(seed)
        s_actor, s_c1, s_c2, s_buf, s_noise = ss.spawn(5)
        actor_dims = (STATE_DIM, *hp.hidden_dims, ACTION_DIM)
        critic_dims = (STATE_DIM + ACTION_DIM, *hp.hidden_dims, 1)
        actor = neural.init_net(actor_dims, _seed_int(s_actor), neural.ACT_TANH, 1.0)
        # A near-zero initial policy keeps early actions unsaturated; a policy
        # born saturated toward the altitude rejection band freezes there.
        actor.weights[-1] *= hp.actor_head_scale
        actor.biases[-1] *= hp.actor_head_scale
        critic1 = neural.init_net(critic_dims, _seed_int(s_c1))
        critic2 = neural.init_net(critic_dims, _seed_int(s_c2))
        return cls(
            actor=actor,
            actor_target=neural.clone_net(actor),
            critic1=critic1,
            critic2=critic2,
            critic1_target=neural.clone_net(critic1),
            critic2_target=neural.clone_net(critic2),
            adam_actor=neural.init_adam(actor, hp.actor_lr),
            adam_critic1=neural.init_adam(critic1, hp.critic_lr),
            adam_critic2=neural.init_adam(critic2, hp.critic_lr),
            buffer=ReplayBuffer(hp.buffer_capacity, _seed_int(s_buf)),
            normalizer=normalizer,
            hp=hp,
            rng=np.random.default_rng(s_noise),
        )


def _seed_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1)[0])


def select_action(agent: Td3Agent, norm_state, explore: bool, rng=None) -> EnvAction:
    """Policy action for a normalized state, denormalized to meters.

    With explore set, adds zero-mean Gaussian noise to the normalized action
    before projecting back onto the action ball; deterministic otherwise.
    """
    a = neural.forward(agent.actor, np.asarray(norm_state, dtype=float))
    if explore:
        gen = agent.rng if rng is None else rng
        a = a + gen.normal(0.0, agent.hp.exploration_noise_std, size=ACTION_DIM)
    a = _project_unit_ball(a)
    return EnvAction(agent.normalizer.denorm_action(a))


def random_action(agent: Td3Agent, rng=None) -> EnvAction:
    """Random draw from the action ball (warm-up exploration).

    The radius is uniform in [0, 1] rather than volume-uniform so that small
    displacements are well represented; the optimal action at a good start
    is near zero and the critic needs data there.
    """
    gen = agent.rng if rng is None else rng
    direction = gen.normal(size=ACTION_DIM)
    direction /= max(np.linalg.norm(direction), 1e-12)
    radius = gen.uniform(0.0, 1.0)
    return EnvAction(agent.normalizer.denorm_action(direction * radius))


def critic_update(agent: Td3Agent, minibatch) -> tuple[float, float]:
    """One clipped double-Q step on both critics against a shared smoothed target."""
    states, actions, rewards, next_states = minibatch
    if states.shape[0] == 0:
        raise InvalidInputError("empty minibatch")
    hp = agent.hp
    next_a = neural.forward(agent.actor_target, next_states)
    noise = agent.rng.normal(0.0, hp.target_noise_std, size=next_a.shape)
    noise = np.clip(noise, -hp.target_noise_clip, hp.target_noise_clip)
    next_a = _project_unit_ball(next_a + noise)
    next_in = np.concatenate([next_states, next_a], axis=1)
    q1t = neural.forward(agent.critic1_target, next_in)[:, 0]
    q2t = neural.forward(agent.critic2_target, next_in)[:, 0]
    y = rewards + hp.discount * np.minimum(q1t, q2t)
    batch_in = np.concatenate([states, actions], axis=1)
    losses = []
    for critic, adam in ((agent.critic1, agent.adam_critic1),
                         (agent.critic2, agent.adam_critic2)):
        q = neural.forward(critic, batch_in)[:, 0]
        err = q - y
        losses.append(float(np.mean(err ** 2)))
        gout = (2.0 * err / err.size)[:, None]
        w_grads, b_grads, _ = neural.backward(critic, batch_in, gout)
        neural.adam_step(critic, w_grads, b_grads, adam)
    agent.critic_updates += 1
    return losses[0], losses[1]


def actor_update(agent: Td3Agent, minibatch) -> float:
    """One gradient-ascent step on the first critic's value of the policy action.

    The critic is evaluated at the ball-projected policy action (the action
    the environment would actually execute); the projection Jacobian is
    applied on the way back so the ascent never chases values outside the
    feasible set. The critics are left untouched; only the actor moves.
    """
    states = minibatch[0]
    batch = states.shape[0]
    raw = neural.forward(agent.actor, states)
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    outside = norms[:, 0] > 1.0
    a = np.where(outside[:, None], raw / np.maximum(norms, 1e-12), raw)
    critic_in = np.concatenate([states, a], axis=1)
    q = neural.forward(agent.critic1, critic_in)[:, 0]
    gout = np.full((batch, 1), -1.0 / batch)
    _, _, input_grad = neural.backward(agent.critic1, critic_in, gout)
    g = input_grad[:, STATE_DIM:]
    if np.any(outside):
        # d(a/r)/da = (I - a_hat a_hat^T)/r: drop the radial component
        radial = np.sum(g * a, axis=1, keepdims=True) * a
        g_proj = (g - radial) / norms
        g = np.where(outside[:, None], g_proj, g)
    w_grads, b_grads, _ = neural.backward(agent.actor, states, g)
    neural.adam_step(agent.actor, w_grads, b_grads, agent.adam_actor)
    agent.actor_updates += 1
    return float(np.mean(q))


def sync_targets(agent: Td3Agent) -> None:
    """Polyak-average all three target networks toward their online twins."""
    tau = agent.hp.tau
    neural.polyak_update(agent.critic1_target, agent.critic1, tau)
    neural.polyak_update(agent.critic2_target, agent.critic2, tau)
    neural.polyak_update(agent.actor_target, agent.actor, tau)


def update(agent: Td3Agent, minibatch) -> tuple[float, float]:
    """Critic step plus, every policy_delay-th call, the delayed actor/target step."""
    losses = critic_update(agent, minibatch)
    if agent.critic_updates % agent.hp.policy_delay == 0:
        actor_update(agent, minibatch)
        sync_targets(agent)
    return losses


@dataclass
class EpisodeLog:
    episode: int
    reward: float
    mean_max_outage: float
    steps: int


def train(env: Environment, agent: Td3Agent, hp: Td3Hyperparams | None = None):
    """Run the training loop on the environment's current topology.

    Consecutive steps are grouped into fixed-length episodes for reward
    reporting; the topology and the UAV position carry across episode
    boundaries. The first warmup_steps actions are uniform in the action
    ball, after which every step performs one critic update and every
    policy_delay-th update also moves the actor and the targets.
    """
    hp = hp or agent.hp
    norm = agent.normalizer
    logs: list[EpisodeLog] = []
    global_step = 0
    for ep in range(hp.episodes):
        state = env.restart_episode().uav_position
        ep_reward = 0.0
        ep_outage = 0.0
        for _ in range(hp.steps_per_episode):
            global_step += 1
            ns = norm.norm_state(state)
            if global_step <= hp.warmup_steps:
                action = random_action(agent)
            else:
                action = select_action(agent, ns, explore=True)
            result = env.step(action)
            nxt = result.next_state.uav_position
            # Rewards are stored pre-scaled so critic targets stay order-one;
            # the logged episode reward keeps the environment's scale.
            agent.buffer.add(Transition(ns, norm.norm_action(action.displacement),
                                        hp.reward_scale * result.reward,
                                        norm.norm_state(nxt)))
            state = nxt
            ep_reward += result.reward
            ep_outage += float(result.outage.per_link_outage.max())
            if len(agent.buffer) > hp.batch_size:
                update(agent, agent.buffer.sample(hp.batch_size))
        logs.append(EpisodeLog(ep, ep_reward, ep_outage / hp.steps_per_episode,
                               hp.steps_per_episode))
    return agent, logs


@dataclass
class RolloutPoint:
    step: int
    time: float
    position: np.ndarray
    reward: float
    outage: np.ndarray


def greedy_rollout(env: Environment, agent: Td3Agent, max_steps: int):
    """Noise-free policy rollout from the environment's current state.

    Emits the starting point (step 0, scored in place) followed by one point
    per step with cumulative flight time.
    """
    norm = agent.normalizer
    state = env.state.uav_position
    start_outage = env.outage_at(state, env.config.mc_samples, env._next_step_seed())
    trace = [RolloutPoint(0, 0.0, state.copy(),
                          outage_to_reward(float(start_outage.per_link_outage.max()),
                                           env.config.reward_floor),
                          start_outage.per_link_outage.copy())]
    t = 0.0
    for k in range(1, max_steps + 1):
        action = select_action(agent, norm.norm_state(state), explore=False)
        result = env.step(action)
        state = result.next_state.uav_position
        t += result.elapsed
        trace.append(RolloutPoint(k, t, state.copy(), result.reward,
                                  result.outage.per_link_outage.copy()))
    return trace
