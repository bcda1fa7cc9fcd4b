"""
Configuration models for the synthetic app suite.
"""

from typing import List, Literal, Tuple

from pydantic import BaseModel, ConfigDict, PositiveInt

AppName = Literal["player", "social", "bank", "market"]
APPS: Tuple[str, ...] = ("player", "social", "bank", "market")


class SuiteConfig(BaseModel):
    """Which app to generate and how hard to make it."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    app: AppName
    string_pool_size: Literal[20, 40, 80] = 20
    dummy_buttons: Literal[0, 5, 10] = 0
    seed: int = 0
    # Player tree shape; ignored by the other apps.
    depth: PositiveInt = 3
    branching: PositiveInt = 4


class Preset(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    config: SuiteConfig


class AppInfo(BaseModel):
    """Facts about a generated app that tests and reports rely on."""
    model_config = ConfigDict(frozen=True)

    app: AppName
    login_nodes: List[str]
    credentials: List[str]
    # Nodes that cannot be entered before the login credential has been submitted.
    gated_nodes: List[str]
