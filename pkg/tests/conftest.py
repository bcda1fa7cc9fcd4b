import hypothesis
import numpy as np
import pytest

from fatesim.config import settings
from fatesim.model.suite_model import SuiteConfig
from fatesim.services.model_service import load_model
from fatesim.services.synthetic_suite import generate

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5)
hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False)

# Tests never write log files into the working tree.
settings.LOG_TO_FILE = False


def tiny_document():
    """Three activities: home -> a -> b, plus an exit, a dummy button and a crash."""
    return {
        "global_vars": [{"name": "count", "value": 0}],
        "nodes": [
            {
                "node_id": "home",
                "transitions": [
                    {"transition_id": 0, "type": "button", "destination": "a"},
                    {"transition_id": 1, "type": "button", "destination": "__external__"},
                    {"transition_id": 2, "type": "button", "destination": "home",
                     "set": ["count = count + 1"]},
                    {"transition_id": 3, "type": "button", "destination": "home", "crash": True},
                ],
            },
            {
                "node_id": "a",
                "transitions": [
                    {"transition_id": 0, "type": "button", "destination": "b"},
                    {"transition_id": 1, "type": "button", "destination": "home"},
                ],
            },
            {
                "node_id": "b",
                "transitions": [
                    {"transition_id": 0, "type": "button", "destination": "home"},
                ],
            },
        ],
        "initial_node": "home",
        "string_pool": ["x"],
        "max_widget_slots": 4,
    }


@pytest.fixture
def tiny_model():
    return load_model(tiny_document())


@pytest.fixture
def tiny_document_factory():
    return tiny_document


@pytest.fixture(scope="session")
def social_model():
    return generate(SuiteConfig(app="social"))


@pytest.fixture
def single_node_model():
    return load_model({
        "nodes": [{"node_id": "only", "transitions": [
            {"transition_id": 0, "type": "button", "destination": "only"},
        ]}],
        "initial_node": "only",
        "string_pool": ["x"],
        "max_widget_slots": 1,
    })
