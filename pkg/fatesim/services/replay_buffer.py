"""
Fixed-capacity FIFO replay buffer backed by numpy ring arrays.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Batch:
    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_observations: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return len(self.rewards)


class ReplayBuffer:
    def __init__(self, capacity: int, observation_size: int, action_size: int = 3):
        if capacity <= 0:
            raise ValueError("Replay capacity must be positive")
        self.capacity = capacity
        self.observations = np.zeros((capacity, observation_size))
        self.actions = np.zeros((capacity, action_size))
        self.rewards = np.zeros(capacity)
        self.next_observations = np.zeros((capacity, observation_size))
        self.dones = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, observation, action, reward: float, next_observation, done: bool):
        i = self._next
        self.observations[i] = observation
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_observations[i] = next_observation
        self.dones[i] = float(done)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        """Storage indices from oldest to newest."""
        if self._size < self.capacity:
            return np.arange(self._size)
        return (np.arange(self.capacity) + self._next) % self.capacity

    def contents(self) -> Batch:
        return self._gather(self._order())

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform sample; with replacement only while the buffer is smaller than the batch."""
        if self._size == 0:
            raise ValueError("Cannot sample from an empty replay buffer")
        replace = self._size < batch_size
        picks = rng.choice(self._size, size=batch_size, replace=replace)
        return self._gather(self._order()[picks])

    def _gather(self, index: np.ndarray) -> Batch:
        return Batch(
            self.observations[index],
            self.actions[index],
            self.rewards[index],
            self.next_observations[index],
            self.dones[index],
        )
