"""
Off-policy actor-critic agents (DDPG, TD3, SAC) on the numpy MLP substrate.

All three act in the continuous space [-1, 1]^3; the environment decodes
the raw triple into a (slot, string, mode) action. Rewards are multiplied by
`reward_scale` before they reach the replay buffer.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np

from fatesim.agents.base import Agent, TransitionRecord
from fatesim.model.agent_model import DDPGConfig, DeepConfig, SACConfig, TD3Config
from fatesim.model.env_model import Observation
from fatesim.services.fate_env import EnvSpec
from fatesim.services.neural import AdamState, ForwardCache, Mlp, adam_step, soft_update
from fatesim.services.replay_buffer import Batch, ReplayBuffer

ACTION_SIZE = 3
LOG_2PI = np.log(2.0 * np.pi)
SQUASH_EPS = 1e-6


class ActorCriticAgent(Agent):
    continuous = True
    config: DeepConfig

    def __init__(self, spec: EnvSpec, config: DeepConfig, seed: Optional[int] = None):
        super().__init__(spec, config, seed)
        self.buffer = ReplayBuffer(config.buffer_size, spec.observation_size, ACTION_SIZE)
        self.env_steps = 0
        self.updates = 0

    def _critic(self) -> Mlp:
        return Mlp(self.spec.observation_size + ACTION_SIZE, 1, self.config.hidden, "linear", self.rng)

    def _optimizer(self, learning_rate: Optional[float] = None) -> AdamState:
        return AdamState(lr=learning_rate or self.config.learning_rate)

    def remember(self, record: TransitionRecord):
        self.buffer.push(
            record.observation.vector,
            np.asarray(record.action, dtype=np.float64),
            record.reward * self.config.reward_scale,
            record.next_observation.vector,
            record.terminal,
        )
        self.env_steps += 1

    def ready(self) -> bool:
        return len(self.buffer) >= self.config.batch_size

    def sample(self) -> Batch:
        return self.buffer.sample(self.config.batch_size, self.rng)

    def regress(self, critic: Mlp, optimizer: AdamState, batch: Batch, targets: np.ndarray) -> float:
        """One MSBE gradient step of `critic` towards `targets`; returns the loss before the step."""
        q, cache = critic.forward(np.hstack([batch.observations, batch.actions]))
        error = q[:, 0] - targets
        loss = float(np.mean(error ** 2))
        grads, _ = critic.backward(cache, (2.0 * error / len(error))[:, None])
        adam_step(critic, optimizer, grads)
        return loss

    def action_gradient(self, critic: Mlp, observations: np.ndarray, actions: np.ndarray,
                        weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Q(s, a) and sum_i weights_i * dQ_i/da_i, without touching critic parameters."""
        q, cache = critic.forward(np.hstack([observations, actions]))
        _, grad_input = critic.backward(cache, weights[:, None])
        return q[:, 0], grad_input[:, self.spec.observation_size:]

    def _deterministic_act(self, actor: Mlp, observation: Observation, explore: bool,
                           random_exploration: float, noise: float) -> np.ndarray:
        if explore and self.rng.random() < random_exploration:
            self.last_action_random = True
            return self.rng.uniform(-1.0, 1.0, ACTION_SIZE)
        self.last_action_random = False
        action = actor(observation.vector)
        if explore and noise > 0:
            action = action + self.rng.normal(0.0, noise, ACTION_SIZE)
        return np.clip(action, -1.0, 1.0)


class DDPGAgent(ActorCriticAgent):
    name = "ddpg"
    config: DDPGConfig

    def __init__(self, spec: EnvSpec, config: Optional[DDPGConfig] = None, seed: Optional[int] = None):
        super().__init__(spec, config or DDPGConfig(), seed)
        self.actor = Mlp(spec.observation_size, ACTION_SIZE, self.config.hidden, "tanh", self.rng)
        self.critic = self._critic()
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = self._optimizer()
        self.critic_opt = self._optimizer(self.config.critic_learning_rate)

    def act(self, observation: Observation, explore: bool = True) -> np.ndarray:
        return self._deterministic_act(
            self.actor, observation, explore, self.config.random_exploration, self.config.action_noise
        )

    def learn(self, record: TransitionRecord):
        self.remember(record)
        if self.ready():
            for _ in range(self.config.nb_train_steps):
                self.update(self.sample())

    def compute_target(self, batch: Batch) -> np.ndarray:
        next_actions = self.target_actor(batch.next_observations)
        next_q = self.target_critic(np.hstack([batch.next_observations, next_actions]))[:, 0]
        return batch.rewards + self.config.gamma * (1.0 - batch.dones) * next_q

    def update(self, batch: Batch) -> Dict[str, float]:
        critic_loss = self.regress(self.critic, self.critic_opt, batch, self.compute_target(batch))

        n = len(batch)
        actions, actor_cache = self.actor.forward(batch.observations)
        q, dq_da = self.action_gradient(self.critic, batch.observations, actions, np.full(n, -1.0 / n))
        actor_grads, _ = self.actor.backward(actor_cache, dq_da)
        adam_step(self.actor, self.actor_opt, actor_grads)

        soft_update(self.target_actor, self.actor, self.config.tau)
        soft_update(self.target_critic, self.critic, self.config.tau)
        self.updates += 1
        return {"critic": critic_loss, "actor": float(-q.mean())}

    def parameters(self) -> List[np.ndarray]:
        return self.actor.params + self.critic.params


class TD3Agent(ActorCriticAgent):
    name = "td3"
    config: TD3Config

    def __init__(self, spec: EnvSpec, config: Optional[TD3Config] = None, seed: Optional[int] = None):
        super().__init__(spec, config or TD3Config(), seed)
        self.actor = Mlp(spec.observation_size, ACTION_SIZE, self.config.hidden, "tanh", self.rng)
        self.critic1 = self._critic()
        self.critic2 = self._critic()
        self.target_actor = self.actor.copy()
        self.target_critic1 = self.critic1.copy()
        self.target_critic2 = self.critic2.copy()
        self.actor_opt = self._optimizer()
        self.critic1_opt = self._optimizer()
        self.critic2_opt = self._optimizer()

    def act(self, observation: Observation, explore: bool = True) -> np.ndarray:
        return self._deterministic_act(
            self.actor, observation, explore, self.config.random_exploration, self.config.action_noise
        )

    def learn(self, record: TransitionRecord):
        self.remember(record)
        if self.ready() and self.env_steps % self.config.train_frequency == 0:
            for _ in range(self.config.updates_per_round):
                self.update(self.sample())

    def compute_target(self, batch: Batch) -> np.ndarray:
        """Clipped double-Q target on a smoothed target action."""
        next_actions = self.target_actor(batch.next_observations)
        noise = np.clip(
            self.rng.normal(0.0, self.config.target_noise, next_actions.shape),
            -self.config.target_noise_clip,
            self.config.target_noise_clip,
        )
        next_actions = np.clip(next_actions + noise, -1.0, 1.0)
        inputs = np.hstack([batch.next_observations, next_actions])
        next_q = np.minimum(self.target_critic1(inputs)[:, 0], self.target_critic2(inputs)[:, 0])
        return batch.rewards + self.config.gamma * (1.0 - batch.dones) * next_q

    def update(self, batch: Batch) -> Dict[str, float]:
        targets = self.compute_target(batch)
        losses = {
            "critic1": self.regress(self.critic1, self.critic1_opt, batch, targets),
            "critic2": self.regress(self.critic2, self.critic2_opt, batch, targets),
        }
        self.updates += 1
        if self.updates % self.config.policy_delay != 0:
            return losses

        n = len(batch)
        actions, actor_cache = self.actor.forward(batch.observations)
        q, dq_da = self.action_gradient(self.critic1, batch.observations, actions, np.full(n, -1.0 / n))
        actor_grads, _ = self.actor.backward(actor_cache, dq_da)
        adam_step(self.actor, self.actor_opt, actor_grads)

        soft_update(self.target_actor, self.actor, self.config.tau)
        soft_update(self.target_critic1, self.critic1, self.config.tau)
        soft_update(self.target_critic2, self.critic2, self.config.tau)
        losses["actor"] = float(-q.mean())
        return losses

    def parameters(self) -> List[np.ndarray]:
        return self.actor.params + self.critic1.params + self.critic2.params


class SACAgent(ActorCriticAgent):
    name = "sac"
    config: SACConfig

    def __init__(self, spec: EnvSpec, config: Optional[SACConfig] = None, seed: Optional[int] = None):
        super().__init__(spec, config or SACConfig(), seed)
        self.actor = Mlp(spec.observation_size, ACTION_SIZE, self.config.hidden, "gaussian", self.rng)
        self.critic1 = self._critic()
        self.critic2 = self._critic()
        self.target_critic1 = self.critic1.copy()
        self.target_critic2 = self.critic2.copy()
        self.actor_opt = self._optimizer()
        self.critic1_opt = self._optimizer()
        self.critic2_opt = self._optimizer()

    def policy(self, observations: np.ndarray) -> Tuple[np.ndarray, np.ndarray, ForwardCache]:
        """Mean and clamped log-std of the pre-squash Gaussian."""
        out, cache = self.actor.forward(observations)
        return out[..., :ACTION_SIZE], out[..., ACTION_SIZE:], cache

    def sample_action(self, mean: np.ndarray, log_std: np.ndarray):
        """Reparameterized squashed sample: a = tanh(mean + std * eps), with its log-probability."""
        eps = self.rng.standard_normal(mean.shape)
        std = np.exp(log_std)
        action = np.tanh(mean + std * eps)
        log_prob = np.sum(
            -0.5 * eps ** 2 - log_std - 0.5 * LOG_2PI - np.log(1.0 - action ** 2 + SQUASH_EPS), axis=-1
        )
        return action, log_prob, eps, std

    def act(self, observation: Observation, explore: bool = True) -> np.ndarray:
        self.last_action_random = False
        mean, log_std, _ = self.policy(observation.vector)
        if not explore:
            return np.tanh(mean)
        return self.sample_action(mean, log_std)[0]

    def learn(self, record: TransitionRecord):
        self.remember(record)
        if self.ready() and self.env_steps % self.config.train_frequency == 0:
            for _ in range(self.config.updates_per_round):
                self.update(self.sample())

    def compute_target(self, batch: Batch) -> np.ndarray:
        mean, log_std, _ = self.policy(batch.next_observations)
        next_actions, log_prob, _, _ = self.sample_action(mean, log_std)
        inputs = np.hstack([batch.next_observations, next_actions])
        next_q = np.minimum(self.target_critic1(inputs)[:, 0], self.target_critic2(inputs)[:, 0])
        soft_q = next_q - self.config.ent_coef * log_prob
        return batch.rewards + self.config.gamma * (1.0 - batch.dones) * soft_q

    def update(self, batch: Batch) -> Dict[str, float]:
        targets = self.compute_target(batch)
        losses = {
            "critic1": self.regress(self.critic1, self.critic1_opt, batch, targets),
            "critic2": self.regress(self.critic2, self.critic2_opt, batch, targets),
        }
        losses["actor"] = self._update_actor(batch)
        self.updates += 1
        if self.updates % self.config.target_update_interval == 0:
            soft_update(self.target_critic1, self.critic1, self.config.tau)
            soft_update(self.target_critic2, self.critic2, self.config.tau)
        return losses

    def _update_actor(self, batch: Batch) -> float:
        """Minimize mean(alpha * log pi(a|s) - min(Q1, Q2)(s, a)) through the reparameterized sample."""
        n = len(batch)
        alpha = self.config.ent_coef
        mean, log_std, cache = self.policy(batch.observations)
        action, log_prob, eps, std = self.sample_action(mean, log_std)

        q1, dq1 = self.action_gradient(self.critic1, batch.observations, action, np.ones(n))
        q2, dq2 = self.action_gradient(self.critic2, batch.observations, action, np.ones(n))
        use_first = (q1 <= q2)[:, None]
        dq_min = np.where(use_first, dq1, dq2)
        loss = float(np.mean(alpha * log_prob - np.minimum(q1, q2)))

        squash = 1.0 - action ** 2
        # d log_prob / d pre-squash value, via the -log(1 - a^2) correction
        dlogp_du = 2.0 * action * squash / (squash + SQUASH_EPS)
        dloss_du = (alpha * dlogp_du - dq_min * squash) / n
        grad_mean = dloss_du
        grad_log_std = dloss_du * std * eps - alpha / n
        grads, _ = self.actor.backward(cache, np.hstack([grad_mean, grad_log_std]))
        adam_step(self.actor, self.actor_opt, grads)
        return loss

    def parameters(self) -> List[np.ndarray]:
        return self.actor.params + self.critic1.params + self.critic2.params
