"""
Gymnasium wrapper around FateEnv, for driving the simulator with
off-the-shelf RL libraries. Actions are the continuous triple in [-1, 1]^3.
"""

from typing import Any, Dict, Optional, Tuple

import gymnasium as gym
import numpy as np
from gymnasium import spaces

from fatesim.model.app_model import AppModel
from fatesim.model.env_model import RewardParams
from fatesim.services.fate_env import EPISODE_LENGTH, FateEnv


class FateGymEnv(gym.Env):
    metadata = {"render_modes": []}

    def __init__(
        self,
        model: AppModel,
        reward_params: Optional[RewardParams] = None,
        episode_length: int = EPISODE_LENGTH,
    ):
        super().__init__()
        self.env = FateEnv(model, reward_params, episode_length)
        self.observation_space = spaces.MultiBinary(self.env.spec.observation_size)
        self.action_space = spaces.Box(low=-1.0, high=1.0, shape=(3,), dtype=np.float32)

    def reset(self, *, seed: Optional[int] = None, options: Optional[Dict[str, Any]] = None):
        super().reset(seed=seed)
        observation = self.env.reset(seed)
        return observation.vector.astype(np.int8), {"coverage": self.env.coverage()}

    def step(self, action) -> Tuple[np.ndarray, float, bool, bool, Dict[str, Any]]:
        triple = self.env.decode_action(action)
        result = self.env.step(triple)
        terminated = result.crash is not None
        truncated = result.episode_done and not terminated
        info = {
            "action": triple,
            "crash": result.crash,
            "transition": result.info,
            "coverage": self.env.coverage(),
        }
        return result.observation.vector.astype(np.int8), float(result.reward), terminated, truncated, info
