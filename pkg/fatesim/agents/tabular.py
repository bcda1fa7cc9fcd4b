"""
Random exploration and tabular Q-Learning.
"""

from typing import Dict, List, Optional

import numpy as np

from fatesim.agents.base import ActionSpace, Agent, TransitionRecord, random_act
from fatesim.model.agent_model import QLearningConfig, RandomConfig
from fatesim.model.env_model import ActionTriple, Observation
from fatesim.services.fate_env import EnvSpec

StateKey = bytes


class QTable:
    """Sparse Q-values keyed by observation bytes; missing entries read as 0."""

    def __init__(self):
        self.values: Dict[StateKey, Dict[ActionTriple, float]] = {}

    def get(self, state: StateKey, action: ActionTriple) -> float:
        return self.values.get(state, {}).get(action, 0.0)

    def set(self, state: StateKey, action: ActionTriple, value: float):
        self.values.setdefault(state, {})[action] = value

    def __len__(self) -> int:
        return sum(len(row) for row in self.values.values())

    def _stored(self, state: StateKey, space: ActionSpace) -> Dict[ActionTriple, float]:
        return {a: v for a, v in self.values.get(state, {}).items() if a in space}

    def max_value(self, state: StateKey, space: ActionSpace) -> float:
        """Max over `space`, with unseen actions at their default of 0. Empty space gives 0."""
        if len(space) == 0:
            return 0.0
        stored = self._stored(state, space)
        best = max(stored.values(), default=0.0)
        return max(best, 0.0) if len(stored) < len(space) else best

    def greedy(self, state: StateKey, space: ActionSpace) -> ActionTriple:
        """Argmax over `space`; ties go to the lowest (slot, string, mode) key."""
        stored = self._stored(state, space)
        best_value = self.max_value(state, space)
        candidates = [a for a, v in stored.items() if v == best_value]
        if best_value == 0.0 and len(stored) < len(space):
            candidates.append(next(a for a in space if a not in stored))
        return min(candidates)


def q_update(
    table: QTable,
    state: StateKey,
    action: ActionTriple,
    reward: float,
    next_state: StateKey,
    next_space: ActionSpace,
    alpha: float,
    gamma: float,
) -> float:
    """One-step Q-Learning backup. Pass an empty space for terminal next states."""
    current = table.get(state, action)
    target = reward + gamma * table.max_value(next_state, next_space)
    value = current + alpha * (target - current)
    table.set(state, action, value)
    return value


def epsilon_greedy(
    table: QTable, state: StateKey, space: ActionSpace, epsilon: float, rng: np.random.Generator
) -> ActionTriple:
    if rng.random() < epsilon:
        return space.sample(rng)
    return table.greedy(state, space)


class RandomAgent(Agent):
    name = "random"

    def __init__(self, spec: EnvSpec, config: Optional[RandomConfig] = None, seed: Optional[int] = None):
        super().__init__(spec, config or RandomConfig(), seed)

    def act(self, observation: Observation, explore: bool = True) -> ActionTriple:
        self.last_action_random = True
        return random_act(observation, self.spec.pool_size, self.rng, self.config.include_system_actions)


class QLearningAgent(Agent):
    name = "qlearn"

    def __init__(self, spec: EnvSpec, config: Optional[QLearningConfig] = None, seed: Optional[int] = None):
        super().__init__(spec, config or QLearningConfig(), seed)
        self.table = QTable()

    def _space(self, observation: Observation) -> ActionSpace:
        return ActionSpace.from_observation(observation, self.spec.pool_size, self.config.include_system_actions)

    def act(self, observation: Observation, explore: bool = True) -> ActionTriple:
        epsilon = self.config.epsilon if explore else 0.0
        return epsilon_greedy(self.table, observation.key, self._space(observation), epsilon, self.rng)

    def learn(self, record: TransitionRecord):
        next_space = ActionSpace.empty() if record.terminal else self._space(record.next_observation)
        q_update(
            self.table,
            record.observation.key,
            record.executed,
            record.reward,
            record.next_observation.key,
            next_space,
            self.config.alpha,
            self.config.gamma,
        )

    def parameters(self) -> List[np.ndarray]:
        entries = sorted(
            (state, action.slot, action.string_index, action.mode, value)
            for state, row in self.table.values.items()
            for action, value in row.items()
        )
        return [np.array([entry[-1] for entry in entries])]
