from itertools import product

import numpy as np
import pytest

from fatesim.model.env_model import EpisodeState
from fatesim.services.fate_env import FateEnv
from fatesim.services.model_service import load_model
from fatesim.services.oracle import CRASHED, FiniteMdp, model_mdp, value_iteration, value_iteration_oracle
from fatesim.utils.errors import OracleError

CORRIDOR = 5


def corridor() -> FiniteMdp:
    """Left/right walk over five cells; stepping right off the last cell pays 10 and ends."""
    transitions = {}
    for cell in range(CORRIDOR):
        right = ("right", "goal", 10.0, True) if cell == CORRIDOR - 1 else ("right", cell + 1, -1.0, False)
        transitions[cell] = [("left", max(cell - 1, 0), -1.0, False), right]
    return FiniteMdp(transitions, initial=0)


def rollout(policy, gamma: float, horizon: int = 200) -> float:
    mdp, cell, total, discount = corridor(), 0, 0.0, 1.0
    for _ in range(horizon):
        outcomes = dict((action, (n, r, t)) for action, n, r, t in mdp.transitions[cell])
        cell, reward, terminal = outcomes[policy[cell]]
        total += discount * reward
        discount *= gamma
        if terminal:
            break
    return total


@pytest.fixture
def counter_free_model(tiny_document_factory):
    document = tiny_document_factory()
    home = document["nodes"][0]
    home["transitions"] = [t for t in home["transitions"] if "set" not in t]
    for i, transition in enumerate(home["transitions"]):
        transition["transition_id"] = i
    return load_model(document)


class TestValueIteration:
    def test_discounted_penalty_stream(self):
        mdp = FiniteMdp({
            "start": [("go", "next", 1000.0, False)],
            "next": [("go", "next", -1.0, False)],
        }, initial="start")
        result = value_iteration(mdp, gamma=0.9)
        assert result.values["start"] == pytest.approx(991.0, abs=1e-6)
        assert result.values["next"] == pytest.approx(-10.0, abs=1e-6)

    def test_corridor_matches_exhaustive_policy_search(self):
        result = value_iteration(corridor(), gamma=0.9)
        best = max(rollout(policy, 0.9) for policy in product(("left", "right"), repeat=CORRIDOR))
        assert result.values[0] == pytest.approx(best, abs=1e-6)
        greedy = tuple(result.greedy(cell) for cell in range(CORRIDOR))
        assert greedy == ("right",) * CORRIDOR
        assert rollout(greedy, 0.9) == pytest.approx(best)

    def test_terminal_outcomes_do_not_bootstrap(self):
        result = value_iteration(corridor(), gamma=0.9)
        assert result.q_values[(CORRIDOR - 1, "right")] == pytest.approx(10.0)
        assert result.values["goal"] == 0.0

    def test_residuals_never_grow(self):
        result = value_iteration(corridor(), gamma=0.95)
        residuals = np.array(result.residuals)
        assert residuals[-1] < 1e-8
        assert np.all(np.diff(residuals) <= 1e-12)

    def test_gamma_range(self):
        with pytest.raises(ValueError):
            value_iteration(corridor(), gamma=1.0)


class TestModelOracle:
    def test_zero_discount_gives_immediate_rewards(self, counter_free_model):
        mdp = model_mdp(counter_free_model)
        result = value_iteration(mdp, gamma=0.0)
        for state, outcomes in mdp.transitions.items():
            for action, _, reward, _ in outcomes:
                assert result.q_values[(state, action)] == reward

    def test_q_values_agree_with_the_environment(self, counter_free_model):
        env = FateEnv(counter_free_model)
        mdp = model_mdp(counter_free_model)
        node, visited, frozen = mdp.initial
        start = EpisodeState(node=node, vars=dict(frozen), visited_this_episode=set(visited),
                             visited_overall=set(visited))
        for action, successor, reward, terminal in mdp.transitions[mdp.initial]:
            _, expected_reward, crash = env.simulate(start, action)
            assert reward == expected_reward
            assert terminal == (crash is not None)
            assert (successor == CRASHED) == terminal

    def test_first_move_discovers_a_new_activity(self, counter_free_model):
        result = value_iteration_oracle(counter_free_model, gamma=0.9)
        best = result.greedy(result.initial)
        assert result.q_values[(result.initial, best)] >= 1000.0

    def test_unbounded_state_space_is_refused(self, tiny_model):
        with pytest.raises(OracleError):
            value_iteration_oracle(tiny_model, gamma=0.9)

    def test_pair_limit(self, counter_free_model):
        with pytest.raises(OracleError):
            model_mdp(counter_free_model, max_pairs=10)
