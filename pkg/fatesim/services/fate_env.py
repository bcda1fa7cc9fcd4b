"""
Episodic MDP environment over an FSM app model.

Observations are the one-hot current activity plus the widget-availability
mask, actions are (slot, string index, mode) triples, and rewards follow the
three-branch exploration reward: a large bonus for reaching an activity not
seen in the current episode (or for a crash), a penalty for leaving the app,
and a small penalty otherwise.
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from fatesim.model.app_model import AppModel, TransitionKind
from fatesim.model.env_model import (
    MODE_COUNT,
    SYSTEM_ACTION_COUNT,
    ActionTriple,
    CrashIdentity,
    EpisodeState,
    Observation,
    RewardParams,
    StepResult,
)
from fatesim.services.guard_lang import exec_set
from fatesim.services.model_service import enabled_slots, is_enabled
from fatesim.utils.errors import EnvironmentContractError

EPISODE_LENGTH = 250
SYSTEM_ACTIONS = ("internet_on", "rotated")


@dataclass(frozen=True)
class EnvSpec:
    """Sizes an agent needs to build its networks and action tables."""
    observation_size: int
    widget_slots: int
    pool_size: int

    @property
    def slot_count(self) -> int:
        return self.widget_slots + SYSTEM_ACTION_COUNT


def encode_observation(node: str, slots: Sequence[int], model: AppModel) -> Observation:
    """`slots` are the enabled positions in the node's transition list."""
    onehot = np.zeros(len(model.nodes), dtype=np.int8)
    onehot[model.index_of(node)] = 1
    mask = np.zeros(model.max_widget_slots, dtype=np.int8)
    mask[list(slots)] = 1
    return Observation(onehot, mask)


def decode_action(raw: Sequence[float], observation: Observation, pool_size: int) -> ActionTriple:
    """Map a continuous triple in [-1, 1]^3 onto an available discrete action."""
    values = np.clip(np.asarray(raw, dtype=np.float64), -1.0, 1.0)
    sizes = (observation.slot_count, pool_size, MODE_COUNT)
    slot, string_index, mode = (
        min(int(np.floor((value + 1.0) / 2.0 * n)), n - 1) for value, n in zip(values, sizes)
    )
    available = observation.available_slots(include_system=True)
    if slot not in available:
        slot = min(available, key=lambda s: (abs(s - slot), s))
    return ActionTriple(slot, string_index, mode)


def coverage(state: EpisodeState, model: AppModel) -> float:
    """Percentage of in-app activities visited so far in the run."""
    app_nodes = model.app_nodes
    if not app_nodes:
        return 0.0
    visited = sum(1 for node in app_nodes if node in state.visited_overall)
    return 100.0 * visited / len(app_nodes)


class FateEnv:
    """One run's environment instance. Not shared between runs."""

    def __init__(
        self,
        model: AppModel,
        reward_params: Optional[RewardParams] = None,
        episode_length: int = EPISODE_LENGTH,
    ):
        if episode_length < 1:
            raise ValueError("episode_length must be positive")
        self.model = model
        self.rewards = reward_params or RewardParams()
        self.episode_length = episode_length
        self.state: Optional[EpisodeState] = None
        self.spec = EnvSpec(
            observation_size=len(model.nodes) + model.max_widget_slots,
            widget_slots=model.max_widget_slots,
            pool_size=len(model.string_pool),
        )

    def reset(self, seed: Optional[int] = None) -> Observation:
        """Restart the app. Coverage accumulated earlier in the run is kept."""
        initial = self.model.initial_node
        previous = self.state
        visited_overall = set(previous.visited_overall) if previous else set()
        visited_overall.add(initial)
        self.state = EpisodeState(
            node=initial,
            vars=self.model.initial_vars(),
            episode=previous.episode + 1 if previous else 1,
            visited_this_episode={initial},
            visited_overall=visited_overall,
        )
        logger.debug(f"Episode {self.state.episode} started at '{initial}' (seed={seed})")
        return self.observe()

    def observe(self) -> Observation:
        state = self._require_state()
        slots = enabled_slots(self.model, state.node, state.vars)
        return encode_observation(state.node, slots, self.model)

    def decode_action(self, raw: Sequence[float]) -> ActionTriple:
        return decode_action(raw, self.observe(), self.spec.pool_size)

    def coverage(self) -> float:
        return coverage(self._require_state(), self.model)

    def simulate(self, state: EpisodeState, action: ActionTriple) -> Tuple[EpisodeState, float, Optional[CrashIdentity]]:
        """Apply `action` to a copy of `state`; the live episode is untouched."""
        self._check_action(action)
        successor = replace(
            state,
            vars=dict(state.vars),
            visited_this_episode=set(state.visited_this_episode),
            visited_overall=set(state.visited_overall),
        )
        reward, crash, _ = self._execute(successor, action)
        return successor, reward, crash

    def step(self, action: ActionTriple) -> StepResult:
        state = self._require_state()
        if state.done:
            raise EnvironmentContractError("Episode is over; call reset() before stepping again")
        self._check_action(action)

        state.step_in_episode += 1
        reward, crash, info = self._execute(state, action)

        state.done = crash is not None or state.step_in_episode >= self.episode_length
        if crash is not None:
            logger.debug(f"Crash at {crash[0]}/{crash[1]} on episode step {state.step_in_episode}")
        return StepResult(
            observation=self.observe(),
            reward=reward,
            episode_done=state.done,
            crash=crash,
            info=info,
        )

    def _execute(self, state: EpisodeState, action: ActionTriple):
        rewards = self.rewards
        widget_slots = self.model.max_widget_slots

        if action.slot >= widget_slots:
            name = SYSTEM_ACTIONS[action.slot - widget_slots]
            state.vars[name] = 1 - int(state.vars[name])
            return -rewards.gamma3, None, f"system:{name}"

        transitions = self.model.node(state.node).transitions
        if action.slot >= len(transitions) or not is_enabled(transitions[action.slot], state.vars):
            return -rewards.gamma3, None, "no-op"

        transition = transitions[action.slot]
        source = state.node
        text = self.model.string_pool[action.string_index] if transition.kind == TransitionKind.TEXT_FIELD else None
        state.vars = exec_set(list(transition.set_exprs), state.vars, text)
        destination = transition.target(action.mode)
        info = f"{source}/{transition.transition_id}"

        crashed_node = self.model.has_node(destination) and self.model.node(destination).crash_node
        if crashed_node:
            # The error activity was shown, so it counts towards coverage.
            state.visited_overall.add(destination)
        if transition.crash or crashed_node:
            return rewards.gamma1, (source, transition.transition_id), info
        if self.model.is_external(destination):
            # Leaving the app is penalized; the simulated back press returns to the source.
            return -rewards.gamma2, None, info

        state.node = destination
        state.visited_overall.add(destination)
        if destination not in state.visited_this_episode:
            state.visited_this_episode.add(destination)
            return rewards.gamma1, None, info
        return -rewards.gamma3, None, info

    def _check_action(self, action: ActionTriple):
        if not 0 <= action.slot < self.spec.slot_count:
            raise EnvironmentContractError(f"Slot {action.slot} outside [0, {self.spec.slot_count})")
        if not 0 <= action.string_index < self.spec.pool_size:
            raise EnvironmentContractError(f"String index {action.string_index} outside the pool")
        if action.mode not in (0, 1):
            raise EnvironmentContractError(f"Mode must be 0 or 1, got {action.mode}")

    def _require_state(self) -> EpisodeState:
        if self.state is None:
            raise EnvironmentContractError("Environment must be reset before use")
        return self.state
