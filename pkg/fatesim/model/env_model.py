"""
Data types exchanged between the simulated environment and the agents.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, PositiveFloat, model_validator

SYSTEM_ACTION_COUNT = 2  # toggle internet connection, rotate screen
MODE_COUNT = 2


@dataclass(frozen=True)
class Observation:
    """One-hot current activity followed by the widget-availability mask."""
    activity_onehot: np.ndarray
    widget_mask: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.activity_onehot, self.widget_mask]).astype(np.float64)

    @property
    def key(self) -> bytes:
        """Hashable identity of the full observation (Q-table state key)."""
        return np.concatenate([self.activity_onehot, self.widget_mask]).astype(np.int8).tobytes()

    @property
    def slot_count(self) -> int:
        """Widget slots plus the always-available system slots."""
        return len(self.widget_mask) + SYSTEM_ACTION_COUNT

    def available_slots(self, include_system: bool = True) -> List[int]:
        slots = [int(i) for i in np.flatnonzero(self.widget_mask)]
        if include_system:
            slots.extend(range(len(self.widget_mask), self.slot_count))
        return slots

    def __eq__(self, other) -> bool:
        if not isinstance(other, Observation):
            return NotImplemented
        return (np.array_equal(self.activity_onehot, other.activity_onehot)
                and np.array_equal(self.widget_mask, other.widget_mask))

    def __hash__(self) -> int:
        return hash(self.key)


@dataclass(frozen=True, order=True)
class ActionTriple:
    """Discrete action: slot (widget or system), string-pool index, mode bit."""
    slot: int
    string_index: int
    mode: int


RawAction = np.ndarray
AgentAction = Union[ActionTriple, RawAction]
CrashIdentity = Tuple[str, int]


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    episode_done: bool
    crash: Optional[CrashIdentity] = None
    info: str = "no-op"


class RewardParams(BaseModel):
    """Reward magnitudes for new activity or crash, leaving the app, and everything else."""
    model_config = ConfigDict(frozen=True)

    gamma1: PositiveFloat = 1000.0
    gamma2: PositiveFloat = 100.0
    gamma3: PositiveFloat = 1.0

    @model_validator(mode="after")
    def check_ordering(self):
        if not (self.gamma1 >= 10 * self.gamma2 >= 100 * self.gamma3):
            raise ValueError("reward magnitudes must satisfy gamma1 >= 10*gamma2 >= 100*gamma3")
        return self


@dataclass
class EpisodeState:
    """Mutable per-run bookkeeping of the environment."""
    node: str
    vars: Dict[str, Union[int, str]]
    step_in_episode: int = 0
    episode: int = 0
    visited_this_episode: Set[str] = field(default_factory=set)
    visited_overall: Set[str] = field(default_factory=set)
    done: bool = False

    @property
    def internet_on(self) -> bool:
        return bool(self.vars.get("internet_on", 1))

    @property
    def rotated(self) -> bool:
        return bool(self.vars.get("rotated", 0))
