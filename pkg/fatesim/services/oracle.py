"""
Value-iteration oracle for verifying learning agents on small models.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Hashable, List, Optional, Tuple

import numpy as np
from loguru import logger

from fatesim.model.app_model import AppModel
from fatesim.model.env_model import ActionTriple, EpisodeState, RewardParams
from fatesim.services.fate_env import FateEnv
from fatesim.utils.errors import OracleError

MAX_PAIRS = 10_000
CRASHED = "__crashed__"

Outcome = Tuple[Hashable, Hashable, float, bool]  # action, next state, reward, terminal
OracleState = Tuple[str, FrozenSet[str], Tuple[Tuple[str, object], ...]]


@dataclass
class FiniteMdp:
    """Deterministic MDP as outcome lists per state; states without outcomes are absorbing with value 0."""
    transitions: Dict[Hashable, List[Outcome]]
    initial: Optional[Hashable] = None


@dataclass
class OracleResult:
    values: Dict[Hashable, float]
    q_values: Dict[Tuple[Hashable, Hashable], float]
    residuals: List[float] = field(default_factory=list)
    initial: Optional[Hashable] = None

    def greedy(self, state: Hashable) -> Hashable:
        """Best action at `state`; ties go to the smallest action."""
        candidates = [(value, action) for (s, action), value in self.q_values.items() if s == state]
        best = max(value for value, _ in candidates)
        return min(action for value, action in candidates if value == best)


def value_iteration(
    mdp: FiniteMdp, gamma: float, tolerance: float = 1e-8, max_iterations: int = 100_000
) -> OracleResult:
    """Synchronous Bellman optimality backups until the sup-norm residual drops below `tolerance`."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")

    states = list(mdp.transitions)
    for outcomes in list(mdp.transitions.values()):
        for _, next_state, _, _ in outcomes:
            if next_state not in mdp.transitions:
                mdp.transitions[next_state] = []
                states.append(next_state)
    index = {state: i for i, state in enumerate(states)}

    pairs = [(s, a, n, r, t) for s in states for a, n, r, t in mdp.transitions[s]]
    source = np.array([index[s] for s, *_ in pairs], dtype=int)
    target = np.array([index[n] for _, _, n, _, _ in pairs], dtype=int)
    reward = np.array([r for *_, r, _ in pairs], dtype=float)
    live = np.array([0.0 if t else 1.0 for *_, t in pairs])

    values = np.zeros(len(states))
    residuals: List[float] = []
    for _ in range(max_iterations):
        q = reward + gamma * live * values[target]
        updated = np.zeros(len(states))
        best = np.full(len(states), -np.inf)
        np.maximum.at(best, source, q)
        has_actions = np.isfinite(best)
        updated[has_actions] = best[has_actions]
        residual = float(np.max(np.abs(updated - values))) if len(states) else 0.0
        residuals.append(residual)
        values = updated
        if residual < tolerance:
            break
    else:
        raise OracleError(f"Value iteration did not converge in {max_iterations} iterations")

    q = reward + gamma * live * values[target]
    q_values = {(s, a): float(v) for (s, a, *_), v in zip(pairs, q)}
    logger.debug(f"Value iteration: {len(states)} states, {len(pairs)} pairs, {len(residuals)} sweeps")
    return OracleResult(
        values={s: float(values[i]) for s, i in index.items()},
        q_values=q_values,
        residuals=residuals,
        initial=mdp.initial,
    )


def _key(state: EpisodeState) -> OracleState:
    return state.node, frozenset(state.visited_this_episode), tuple(sorted(state.vars.items()))


def model_mdp(
    model: AppModel,
    reward_params: Optional[RewardParams] = None,
    include_system: bool = True,
    max_pairs: int = MAX_PAIRS,
) -> FiniteMdp:
    """
    Enumerate the episode-aware state space of `model`: states are (node,
    activities visited this episode, variables). Crashes lead to an absorbing
    state; the episode-length cutoff is ignored.
    """
    env = FateEnv(model, reward_params)
    slots = env.spec.slot_count if include_system else env.spec.widget_slots
    actions = [
        ActionTriple(slot, string_index, mode)
        for slot in range(slots)
        for string_index in range(env.spec.pool_size)
        for mode in (0, 1)
    ]
    start = EpisodeState(
        node=model.initial_node,
        vars=model.initial_vars(),
        visited_this_episode={model.initial_node},
        visited_overall={model.initial_node},
    )

    transitions: Dict[Hashable, List[Outcome]] = {}
    frontier = deque([start])
    seen = {_key(start)}
    pairs = 0
    while frontier:
        state = frontier.popleft()
        outcomes = []
        for action in actions:
            pairs += 1
            if pairs > max_pairs:
                raise OracleError(f"State-action space exceeds {max_pairs} pairs")
            successor, reward, crash = env.simulate(state, action)
            if crash is not None:
                outcomes.append((action, CRASHED, reward, True))
                continue
            key = _key(successor)
            outcomes.append((action, key, reward, False))
            if key not in seen:
                seen.add(key)
                frontier.append(successor)
        transitions[_key(state)] = outcomes
    return FiniteMdp(transitions, initial=_key(start))


def value_iteration_oracle(
    model: AppModel,
    gamma: float,
    reward_params: Optional[RewardParams] = None,
    include_system: bool = True,
    max_pairs: int = MAX_PAIRS,
) -> OracleResult:
    return value_iteration(model_mdp(model, reward_params, include_system, max_pairs), gamma)
