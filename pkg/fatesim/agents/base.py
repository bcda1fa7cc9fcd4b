"""
Shared agent interface and the discrete action space helpers.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence

import numpy as np

from fatesim.model.agent_model import AgentConfig
from fatesim.model.env_model import MODE_COUNT, ActionTriple, AgentAction, Observation
from fatesim.services.fate_env import EnvSpec


@dataclass(frozen=True)
class TransitionRecord:
    """What an agent learns from after one environment step."""
    observation: Observation
    action: AgentAction
    executed: ActionTriple
    reward: float
    next_observation: Observation
    terminal: bool  # crash; truncation at the episode limit is not terminal
    episode_done: bool


@dataclass(frozen=True)
class ActionSpace:
    """Available discrete actions at one observation: slots x pool x modes."""
    slots: Sequence[int]
    pool_size: int

    @classmethod
    def from_observation(cls, observation: Observation, pool_size: int, include_system: bool = True) -> "ActionSpace":
        slots = observation.available_slots(include_system)
        if not slots:
            # No enabled widget: only the system actions remain.
            slots = list(range(len(observation.widget_mask), observation.slot_count))
        return cls(tuple(slots), pool_size)

    @classmethod
    def empty(cls) -> "ActionSpace":
        return cls((), 0)

    def __len__(self) -> int:
        return len(self.slots) * self.pool_size * MODE_COUNT

    def __contains__(self, action: ActionTriple) -> bool:
        return action.slot in self.slots and 0 <= action.string_index < self.pool_size and action.mode in (0, 1)

    def __iter__(self) -> Iterator[ActionTriple]:
        for slot in sorted(self.slots):
            for string_index in range(self.pool_size):
                for mode in range(MODE_COUNT):
                    yield ActionTriple(slot, string_index, mode)

    def sample(self, rng: np.random.Generator) -> ActionTriple:
        slot = self.slots[int(rng.integers(len(self.slots)))]
        return ActionTriple(int(slot), int(rng.integers(self.pool_size)), int(rng.integers(MODE_COUNT)))


def random_act(
    observation: Observation, pool_size: int, rng: np.random.Generator, include_system: bool = True
) -> ActionTriple:
    """Uniform draw over available slots, pool strings and modes."""
    return ActionSpace.from_observation(observation, pool_size, include_system).sample(rng)


class Agent(ABC):
    name: str = "agent"
    continuous: bool = False

    def __init__(self, spec: EnvSpec, config: AgentConfig, seed: Optional[int] = None):
        self.spec = spec
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.last_action_random = False

    @abstractmethod
    def act(self, observation: Observation, explore: bool = True) -> AgentAction:
        """Choose the next action. Continuous agents return a raw triple in [-1, 1]^3."""

    def learn(self, record: TransitionRecord):
        pass

    def parameters(self) -> List[np.ndarray]:
        return []
