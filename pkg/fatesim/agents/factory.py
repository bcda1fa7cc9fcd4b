from typing import Any, Dict, Mapping, Optional, Type

from pydantic import ValidationError

from fatesim.agents.actor_critic import DDPGAgent, SACAgent, TD3Agent
from fatesim.agents.base import Agent
from fatesim.agents.tabular import QLearningAgent, RandomAgent
from fatesim.model.agent_model import ALGORITHMS, CONFIG_TYPES, AgentConfig
from fatesim.services.fate_env import EnvSpec
from fatesim.utils.errors import ConfigError

AGENT_TYPES: Dict[str, Type[Agent]] = {
    "random": RandomAgent,
    "qlearn": QLearningAgent,
    "ddpg": DDPGAgent,
    "td3": TD3Agent,
    "sac": SACAgent,
}


def resolve_config(algorithm: str, overrides: Optional[Mapping[str, Any]] = None) -> AgentConfig:
    """Defaults for `algorithm` with `overrides` applied; unknown knobs are rejected."""
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"Unknown algorithm '{algorithm}', expected one of {', '.join(ALGORITHMS)}")
    try:
        return CONFIG_TYPES[algorithm].model_validate(dict(overrides or {}))
    except ValidationError as e:
        error = e.errors()[0]
        knob = ".".join(str(part) for part in error["loc"])
        raise ConfigError(f"Invalid {algorithm} setting '{knob}': {error['msg']}")


def build_agent(
    algorithm: str,
    spec: EnvSpec,
    overrides: Optional[Mapping[str, Any]] = None,
    seed: Optional[int] = None,
) -> Agent:
    config = resolve_config(algorithm, overrides)
    return AGENT_TYPES[algorithm](spec, config, seed)
