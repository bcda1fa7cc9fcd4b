"""
Agent hyperparameters. Every field can be overridden by name from the
experiment config or `--set algo.knob=value` on the command line.
"""

from itertools import product
from typing import Dict, List, Literal, Optional, Tuple, Type, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveInt

AlgorithmName = Literal["random", "qlearn", "ddpg", "td3", "sac"]
ALGORITHMS: Tuple[str, ...] = ("random", "qlearn", "ddpg", "td3", "sac")
DEEP_ALGORITHMS: Tuple[str, ...] = ("ddpg", "td3", "sac")


class AgentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    include_system_actions: bool = True


class RandomConfig(AgentConfig):
    pass


class QLearningConfig(AgentConfig):
    alpha: float = Field(0.628, ge=0.0, le=1.0)
    gamma: float = Field(0.9, ge=0.0, le=1.0)
    epsilon: float = Field(0.8, ge=0.0, le=1.0)


class DeepConfig(AgentConfig):
    learning_rate: float = Field(3e-4, gt=0.0)
    gamma: float = Field(0.99, ge=0.0, le=1.0)
    tau: float = Field(0.005, ge=0.0, le=1.0)
    batch_size: PositiveInt = 128
    buffer_size: PositiveInt = 50_000
    hidden: Tuple[PositiveInt, ...] = (64, 64)
    # Rewards are in the hundreds; networks see them scaled down.
    reward_scale: float = Field(0.001, gt=0.0)


class DDPGConfig(DeepConfig):
    learning_rate: float = Field(1e-4, gt=0.0)
    critic_learning_rate: float = Field(1e-3, gt=0.0)
    random_exploration: float = Field(0.7, ge=0.0, le=1.0)
    nb_train_steps: PositiveInt = 10
    action_noise: float = Field(0.1, ge=0.0)


class RoundTrainedConfig(DeepConfig):
    """Agents that train every `train_frequency` steps, `gradient_steps` updates at a time."""
    train_frequency: PositiveInt = 10
    gradient_steps: Optional[PositiveInt] = None  # defaults to train_frequency

    @property
    def updates_per_round(self) -> int:
        return self.gradient_steps or self.train_frequency


class TD3Config(RoundTrainedConfig):
    random_exploration: float = Field(0.8, ge=0.0, le=1.0)
    policy_delay: PositiveInt = 2
    target_noise: float = Field(0.2, ge=0.0)
    target_noise_clip: float = Field(0.5, ge=0.0)
    action_noise: float = Field(0.1, ge=0.0)


class SACConfig(RoundTrainedConfig):
    train_frequency: PositiveInt = 5
    target_update_interval: PositiveInt = 10
    ent_coef: float = Field(0.2, ge=0.0)


CONFIG_TYPES: Dict[str, Type[AgentConfig]] = {
    "random": RandomConfig,
    "qlearn": QLearningConfig,
    "ddpg": DDPGConfig,
    "td3": TD3Config,
    "sac": SACConfig,
}

AnyAgentConfig = Union[RandomConfig, QLearningConfig, DDPGConfig, TD3Config, SACConfig]


def default_config(algorithm: str) -> AgentConfig:
    return CONFIG_TYPES[algorithm]()


class GridPoint(BaseModel):
    """One cell of a hyperparameter sweep."""
    model_config = ConfigDict(frozen=True)

    algorithm: AlgorithmName
    index: PositiveInt
    overrides: Dict[str, Union[int, float]]

    @property
    def label(self) -> str:
        return f"{self.algorithm}#{self.index}"


def _grid(algorithm: str, axes: Dict[str, List[Union[int, float]]]) -> List[GridPoint]:
    names = list(axes)
    return [
        GridPoint(algorithm=algorithm, index=i + 1, overrides=dict(zip(names, values)))
        for i, values in enumerate(product(*(axes[name] for name in names)))
    ]


# Hyperparameter-tuning grids swept before the main comparison.
SWEEP_GRIDS: Dict[str, List[GridPoint]] = {
    "ddpg": _grid("ddpg", {"random_exploration": [0.5, 0.6, 0.7, 0.8], "nb_train_steps": [5, 25]}),
    "td3": _grid("td3", {"random_exploration": [0.5, 0.6, 0.7, 0.8], "train_frequency": [25, 100]}),
    "sac": _grid("sac", {"target_update_interval": [1, 2, 5, 10], "train_frequency": [1, 5]}),
    "qlearn": _grid("qlearn", {"gamma": [0.99, 0.9], "epsilon": [0.5, 0.6, 0.7, 0.8]}),
}
