import numpy as np
import pytest
from scipy.stats import chisquare, norm

from fatesim.agents.actor_critic import DDPGAgent, SACAgent, TD3Agent
from fatesim.agents.base import ActionSpace, TransitionRecord, random_act
from fatesim.agents.factory import build_agent, resolve_config
from fatesim.agents.tabular import QLearningAgent, QTable, RandomAgent, epsilon_greedy, q_update
from fatesim.model.agent_model import SWEEP_GRIDS, DDPGConfig, SACConfig, TD3Config
from fatesim.model.env_model import ActionTriple, Observation
from fatesim.services.fate_env import EnvSpec, FateEnv
from fatesim.services.oracle import FiniteMdp, value_iteration
from fatesim.services.replay_buffer import ReplayBuffer
from fatesim.utils.errors import ConfigError

SMALL = {"hidden": (16, 16), "batch_size": 8, "buffer_size": 256}


def observation(node: int, mask, nodes: int = 3) -> Observation:
    onehot = np.zeros(nodes, dtype=np.int8)
    onehot[node] = 1
    return Observation(onehot, np.asarray(mask, dtype=np.int8))


def spec_for(obs: Observation, pool_size: int = 1) -> EnvSpec:
    return EnvSpec(len(obs.vector), len(obs.widget_mask), pool_size)


def fill(agent, obs, records: int, reward: float = 1.0, terminal: bool = False):
    for _ in range(records):
        raw = agent.rng.uniform(-1, 1, 3)
        agent.learn(TransitionRecord(obs, raw, ActionTriple(0, 0, 0), reward, obs, terminal, False))


def params_equal(a, b) -> bool:
    return all(np.array_equal(x, y) for x, y in zip(a, b))


class TestRandomAct:
    def test_single_available_slot(self):
        obs = observation(0, [0, 1, 0])
        rng = np.random.default_rng(0)
        actions = {random_act(obs, 1, rng, include_system=False) for _ in range(50)}
        assert actions == {ActionTriple(1, 0, 0), ActionTriple(1, 0, 1)}

    def test_uniform_over_slots(self):
        obs = observation(0, [1, 1, 1, 1])
        rng = np.random.default_rng(0)
        counts = np.bincount([random_act(obs, 1, rng, include_system=False).slot for _ in range(10_000)], minlength=4)
        assert chisquare(counts).pvalue > 0.01

    def test_masked_slots_never_chosen(self):
        obs = observation(0, [0, 1, 0, 1])
        rng = np.random.default_rng(1)
        slots = {random_act(obs, 5, rng).slot for _ in range(2_000)}
        assert slots == {1, 3, 4, 5}

    def test_empty_mask_uses_system_actions(self):
        obs = observation(0, [0, 0])
        space = ActionSpace.from_observation(obs, 1, include_system=False)
        assert space.slots == (2, 3)


class TestQLearning:
    def test_first_reward(self):
        table = QTable()
        space = ActionSpace((0,), 1)
        assert q_update(table, b"s", ActionTriple(0, 0, 0), 1000.0, b"t", space, 0.628, 0.9) == pytest.approx(628.0)

    def test_negative_step(self):
        table = QTable()
        space = ActionSpace((0,), 1)
        for action in space:
            table.set(b"t", action, 10.0)
        table.set(b"s", ActionTriple(0, 0, 0), 10.0)
        assert q_update(table, b"s", ActionTriple(0, 0, 0), -1.0, b"t", space, 0.628, 0.9) == pytest.approx(8.744)

    def test_zero_learning_rate(self):
        table = QTable()
        table.set(b"s", ActionTriple(0, 0, 0), 3.5)
        q_update(table, b"s", ActionTriple(0, 0, 0), 1000.0, b"t", ActionSpace((0,), 1), 0.0, 0.9)
        assert table.get(b"s", ActionTriple(0, 0, 0)) == 3.5

    def test_terminal_update_ignores_successor(self):
        table = QTable()
        table.set(b"t", ActionTriple(0, 0, 0), 50.0)
        value = q_update(table, b"s", ActionTriple(0, 0, 0), 10.0, b"t", ActionSpace.empty(), 0.5, 0.9)
        assert value == pytest.approx(5.0)

    def test_greedy_picks_positive_entry(self):
        table = QTable()
        space = ActionSpace((0, 1, 2), 2)
        table.set(b"s", ActionTriple(2, 1, 0), 4.0)
        rng = np.random.default_rng(0)
        assert {epsilon_greedy(table, b"s", space, 0.0, rng) for _ in range(100)} == {ActionTriple(2, 1, 0)}

    def test_greedy_ties_go_to_lowest_key(self):
        table = QTable()
        space = ActionSpace((1, 3), 2)
        assert table.greedy(b"s", space) == ActionTriple(1, 0, 0)
        for action in space:
            table.set(b"s", action, -1.0)
        table.set(b"s", ActionTriple(3, 1, 1), 2.0)
        table.set(b"s", ActionTriple(3, 0, 1), 2.0)
        assert table.greedy(b"s", space) == ActionTriple(3, 0, 1)

    def test_exploration_rate(self):
        table = QTable()
        space = ActionSpace((0, 1, 2, 3), 1)
        best = ActionTriple(2, 0, 1)
        table.set(b"s", best, 1.0)
        rng = np.random.default_rng(3)
        hits = sum(epsilon_greedy(table, b"s", space, 0.8, rng) == best for _ in range(10_000)) / 10_000
        expected = 0.2 + 0.8 / len(space)
        assert abs(hits - expected) < 3 * np.sqrt(expected * (1 - expected) / 10_000)

    def test_full_exploration_is_uniform(self):
        table = QTable()
        space = ActionSpace((0, 1, 2, 3), 1)
        table.set(b"s", ActionTriple(0, 0, 0), 5.0)
        rng = np.random.default_rng(4)
        counts = np.bincount([epsilon_greedy(table, b"s", space, 1.0, rng).slot for _ in range(10_000)], minlength=4)
        assert chisquare(counts).pvalue > 0.01

    def test_agent_learns_from_crash_without_bootstrap(self):
        obs = observation(0, [1, 0])
        agent = QLearningAgent(spec_for(obs), seed=0)
        agent.table.set(obs.key, ActionTriple(0, 0, 0), 100.0)
        agent.learn(TransitionRecord(obs, ActionTriple(0, 0, 0), ActionTriple(0, 0, 0), 1000.0, obs, True, True))
        assert agent.table.get(obs.key, ActionTriple(0, 0, 0)) == pytest.approx(100.0 + 0.628 * 900.0)


def chain_step(state: int, slot: int):
    """Five-state corridor: slot 1 walks right, slot 0 left; leaving the right end pays 10 and ends."""
    if slot == 1:
        if state == 4:
            return "end", 10.0, True
        return state + 1, -1.0, False
    return max(state - 1, 0), -1.0, False


@pytest.fixture(scope="module")
def chain_oracle():
    space = ActionSpace((0, 1), 1)
    transitions = {s: [(a, *chain_step(s, a.slot)) for a in space] for s in range(5)}
    return value_iteration(FiniteMdp(transitions, initial=0), gamma=0.9)


class TestTabularConvergence:
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_value_iteration(self, chain_oracle, seed):
        space = ActionSpace((0, 1), 1)
        table = QTable()
        rng = np.random.default_rng(seed)
        state, visited = 0, set()
        for _ in range(50_000):
            action = epsilon_greedy(table, state, space, 0.5, rng)
            successor, reward, terminal = chain_step(state, action.slot)
            next_space = ActionSpace.empty() if terminal else space
            q_update(table, state, action, reward, successor, next_space, 0.628, 0.9)
            visited.add((state, action))
            state = 0 if terminal else successor

        for s in range(5):
            assert table.greedy(s, space).slot == chain_oracle.greedy(s).slot
        assert max(abs(table.get(s, a) - chain_oracle.q_values[(s, a)]) for s, a in visited) < 1.0


class TestReplayBuffer:
    def test_fifo_eviction(self):
        buffer = ReplayBuffer(capacity=5, observation_size=1, action_size=1)
        for i in range(8):
            buffer.push([i], [i], float(i), [i + 1], False)
        assert len(buffer) == 5
        assert buffer.contents().rewards.tolist() == [3.0, 4.0, 5.0, 6.0, 7.0]

    def test_sample_without_replacement_when_full_enough(self):
        buffer = ReplayBuffer(capacity=10, observation_size=1, action_size=1)
        for i in range(10):
            buffer.push([i], [0], float(i), [0], False)
        batch = buffer.sample(10, np.random.default_rng(0))
        assert sorted(batch.rewards.tolist()) == [float(i) for i in range(10)]

    def test_sampling_empty_buffer(self):
        with pytest.raises(ValueError):
            ReplayBuffer(3, 1).sample(1, np.random.default_rng(0))


@pytest.fixture
def deep_obs():
    return observation(1, [1, 1, 0])


class TestDDPG:
    def test_critic_loss_decreases_on_a_frozen_transition(self, deep_obs):
        config = DDPGConfig(**SMALL, reward_scale=1.0)
        agent = DDPGAgent(spec_for(deep_obs), config, seed=0)
        agent.remember(TransitionRecord(deep_obs, np.array([0.1, -0.3, 0.5]), ActionTriple(0, 0, 0),
                                        100.0, deep_obs, True, True))
        batch = agent.buffer.contents()
        losses = [agent.update(batch)["critic"] for _ in range(51)]
        assert all(later < earlier for earlier, later in zip(losses, losses[1:]))

    def test_trains_once_buffer_holds_a_batch(self, deep_obs):
        agent = DDPGAgent(spec_for(deep_obs), DDPGConfig(**SMALL, nb_train_steps=3), seed=0)
        fill(agent, deep_obs, 7)
        assert agent.updates == 0
        fill(agent, deep_obs, 2)
        assert agent.updates == 6

    def test_random_exploration_fraction(self, deep_obs):
        agent = DDPGAgent(spec_for(deep_obs), DDPGConfig(**SMALL, random_exploration=0.7), seed=5)
        randoms = 0
        for _ in range(10_000):
            action = agent.act(deep_obs)
            assert np.all(np.abs(action) <= 1.0)
            randoms += agent.last_action_random
        assert abs(randoms / 10_000 - 0.7) < 3 * np.sqrt(0.21 / 10_000)

    def test_full_random_exploration_is_uniform(self, deep_obs):
        agent = DDPGAgent(spec_for(deep_obs), DDPGConfig(**SMALL, random_exploration=1.0), seed=6)
        samples = np.array([agent.act(deep_obs) for _ in range(5_000)])
        assert np.all(np.abs(samples) <= 1.0)
        assert np.all(np.abs(samples.mean(axis=0)) < 0.05)
        assert np.all(np.abs(samples.var(axis=0) - 1.0 / 3.0) < 0.02)

    def test_greedy_action_is_the_actor(self, deep_obs):
        agent = DDPGAgent(spec_for(deep_obs), DDPGConfig(**SMALL), seed=7)
        assert np.array_equal(agent.act(deep_obs, explore=False), agent.actor(deep_obs.vector))

    def test_critic_learns_faster_than_actor(self, deep_obs):
        agent = DDPGAgent(spec_for(deep_obs), DDPGConfig(**SMALL), seed=8)
        assert (agent.actor_opt.lr, agent.critic_opt.lr) == (1e-4, 1e-3)


class TestTD3:
    @pytest.fixture
    def agent(self, deep_obs):
        td3 = TD3Agent(spec_for(deep_obs), TD3Config(**SMALL, policy_delay=2, train_frequency=4), seed=0)
        fill(td3, deep_obs, 8)
        return td3

    def _target_with(self, agent, batch, state):
        agent.rng.bit_generator.state = state
        return agent.compute_target(batch)

    def test_twin_minimum(self, deep_obs):
        agent = TD3Agent(spec_for(deep_obs), TD3Config(**SMALL), seed=1)
        for _ in range(8):
            agent.remember(TransitionRecord(deep_obs, agent.rng.uniform(-1, 1, 3), ActionTriple(0, 0, 0),
                                            1.0, deep_obs, False, False))
        batch = agent.buffer.contents()
        state = agent.rng.bit_generator.state

        agent.target_critic2 = agent.target_critic1.copy()
        twin = self._target_with(agent, batch, state)

        shifted = agent.target_critic1.copy()
        shifted.biases[-1] = shifted.biases[-1] - 5.0
        agent.target_critic2 = shifted
        lowered = self._target_with(agent, batch, state)

        agent.rng.bit_generator.state = state
        next_actions = agent.target_actor(batch.next_observations)
        noise = np.clip(agent.rng.normal(0.0, 0.2, next_actions.shape), -0.5, 0.5)
        inputs = np.hstack([batch.next_observations, np.clip(next_actions + noise, -1, 1)])
        single = batch.rewards + agent.config.gamma * agent.target_critic1(inputs)[:, 0]

        assert np.allclose(twin, single)
        assert np.allclose(twin - lowered, agent.config.gamma * 5.0)

    def test_policy_delay(self, agent):
        batch = agent.sample()
        actor_before = [p.copy() for p in agent.actor.params]
        target_before = [p.copy() for p in agent.target_actor.params]
        critic_before = [p.copy() for p in agent.critic1.params]
        start = agent.updates
        losses = agent.update(batch)
        if (start + 1) % 2 != 0:
            assert "actor" not in losses
            assert params_equal(actor_before, agent.actor.params)
            assert params_equal(target_before, agent.target_actor.params)
            assert not params_equal(critic_before, agent.critic1.params)
            losses = agent.update(batch)
        assert "actor" in losses
        assert not params_equal(actor_before, agent.actor.params)

    def test_updates_follow_train_frequency(self, agent, deep_obs):
        assert agent.updates == 4  # one round at step 8
        fill(agent, deep_obs, 3)
        assert agent.updates == 4
        fill(agent, deep_obs, 1)
        assert agent.updates == 8


class TestSAC:
    def test_zero_entropy_coefficient_gives_clipped_double_target(self, deep_obs):
        agent = SACAgent(spec_for(deep_obs), SACConfig(**SMALL, ent_coef=0.0), seed=2)
        fill(agent, deep_obs, 4)
        batch = agent.buffer.contents()
        state = agent.rng.bit_generator.state
        target = agent.compute_target(batch)

        agent.rng.bit_generator.state = state
        mean, log_std, _ = agent.policy(batch.next_observations)
        actions, _, _, _ = agent.sample_action(mean, log_std)
        inputs = np.hstack([batch.next_observations, actions])
        q = np.minimum(agent.target_critic1(inputs)[:, 0], agent.target_critic2(inputs)[:, 0])
        assert np.allclose(target, batch.rewards + agent.config.gamma * (1 - batch.dones) * q)

    def test_log_probability_stays_finite(self, deep_obs):
        agent = SACAgent(spec_for(deep_obs), SACConfig(**SMALL), seed=3)
        mean = np.array([[1e3, -1e3, 0.0]])
        for log_std in (np.full((1, 3), -20.0), np.full((1, 3), 2.0)):
            action, log_prob, _, _ = agent.sample_action(mean, log_std)
            assert np.all(np.isfinite(log_prob))
            assert np.all(np.abs(action) <= 1.0)

    def test_mean_action_without_exploration(self, deep_obs):
        agent = SACAgent(spec_for(deep_obs), SACConfig(**SMALL), seed=4)
        first = agent.act(deep_obs, explore=False)
        assert np.array_equal(first, agent.act(deep_obs, explore=False))
        assert np.array_equal(first, np.tanh(agent.policy(deep_obs.vector)[0]))

    def test_target_update_interval(self, deep_obs):
        agent = SACAgent(spec_for(deep_obs), SACConfig(**SMALL, train_frequency=1, target_update_interval=3), seed=5)
        fill(agent, deep_obs, 7)
        target_before = [p.copy() for p in agent.target_critic1.params]
        fill(agent, deep_obs, 1)
        assert agent.updates == 1
        assert params_equal(target_before, agent.target_critic1.params)
        fill(agent, deep_obs, 2)
        assert agent.updates == 3
        assert not params_equal(target_before, agent.target_critic1.params)

    def test_rounds_default_to_one_update_per_step(self, deep_obs):
        agent = SACAgent(spec_for(deep_obs), SACConfig(**SMALL), seed=7)
        fill(agent, deep_obs, 9)
        assert agent.updates == 0
        fill(agent, deep_obs, 1)
        assert agent.updates == 5
        fill(agent, deep_obs, 5)
        assert agent.updates == 10

    def test_bandit_policy_keeps_entropy(self, deep_obs):
        """Two arms split by the sign of the first action component, both paying the same."""
        agent = SACAgent(spec_for(deep_obs), SACConfig(hidden=(16, 16), batch_size=32, buffer_size=512), seed=6)
        fill(agent, deep_obs, 256, reward=1.0, terminal=True)
        for _ in range(2_000):
            agent.update(agent.sample())
        mean, log_std, _ = agent.policy(deep_obs.vector)
        p = float(norm.cdf(mean[0] / np.exp(log_std[0])))
        entropy = -sum(q * np.log(q) for q in (p, 1.0 - p) if q > 0)
        assert entropy > 0.5


class TestFactory:
    def test_builds_every_algorithm(self, deep_obs):
        spec = spec_for(deep_obs)
        for name in ("random", "qlearn", "ddpg", "td3", "sac"):
            agent = build_agent(name, spec, SMALL if name in ("ddpg", "td3", "sac") else None, seed=0)
            assert agent.name == name
        assert isinstance(build_agent("random", spec), RandomAgent)

    def test_unknown_knob(self):
        with pytest.raises(ConfigError, match="nb_train_step"):
            resolve_config("ddpg", {"nb_train_step": 3})

    def test_unknown_algorithm(self):
        with pytest.raises(ConfigError):
            resolve_config("a2c")

    def test_sweep_grids_resolve(self):
        sizes = {name: len(points) for name, points in SWEEP_GRIDS.items()}
        assert sizes == {"ddpg": 8, "td3": 8, "sac": 8, "qlearn": 8}
        for points in SWEEP_GRIDS.values():
            for point in points:
                resolve_config(point.algorithm, point.overrides)
        assert SWEEP_GRIDS["ddpg"][2].label == "ddpg#3"


def trained_parameters(model, algorithm: str, seed: int, steps: int = 40):
    env = FateEnv(model, episode_length=10)
    agent = build_agent(algorithm, env.spec, SMALL if algorithm in ("ddpg", "td3", "sac") else None, seed=seed)
    obs = env.reset(seed)
    for _ in range(steps):
        action = agent.act(obs)
        executed = env.decode_action(action) if agent.continuous else action
        result = env.step(executed)
        agent.learn(TransitionRecord(obs, action, executed, result.reward, result.observation,
                                     result.crash is not None, result.episode_done))
        obs = env.reset(seed) if result.episode_done else result.observation
    return agent.parameters()


class TestParameters:
    @pytest.mark.parametrize("algorithm", ["random", "qlearn", "ddpg", "td3", "sac"])
    def test_same_seed_learns_the_same_parameters(self, tiny_model, algorithm):
        first = trained_parameters(tiny_model, algorithm, seed=11)
        second = trained_parameters(tiny_model, algorithm, seed=11)
        assert len(first) == len(second)
        assert params_equal(first, second)

    @pytest.mark.parametrize("algorithm", ["ddpg", "td3", "sac"])
    def test_seed_changes_deep_parameters(self, tiny_model, algorithm):
        assert not params_equal(trained_parameters(tiny_model, algorithm, seed=11),
                                trained_parameters(tiny_model, algorithm, seed=12))

    def test_tabular_parameters_follow_the_table(self, tiny_model):
        (values,) = trained_parameters(tiny_model, "qlearn", seed=3)
        assert values.size > 0
        assert np.all(np.isfinite(values))

    def test_random_agent_has_none(self, tiny_model):
        assert trained_parameters(tiny_model, "random", seed=0) == []
