"""
Pydantic models for FSM app models (global variables, nodes, guarded transitions).
"""

from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, PrivateAttr, StrictInt, StrictStr, field_validator

from fatesim.services.guard_lang import Assignment, ExprType, GuardExpr

EXTERNAL = "__external__"

# Implicit variables toggled by the two system actions; guards may reference them.
SYSTEM_VARIABLES: Dict[str, int] = {"internet_on": 1, "rotated": 0}


class TransitionKind(str, Enum):
    BUTTON = "button"
    LONG_BUTTON = "long_button"
    TEXT_FIELD = "text_field"
    SCROLL = "scroll"
    SYSTEM = "system"


class GlobalVar(BaseModel):
    """A global variable declaration with its initial value."""
    model_config = ConfigDict(frozen=True)

    name: str
    value: Union[StrictInt, StrictStr]

    @field_validator("value", mode="before")
    @classmethod
    def booleans_are_ints(cls, v):
        if isinstance(v, bool):
            return int(v)
        return v

    @property
    def type(self) -> ExprType:
        return ExprType.INT if isinstance(self.value, int) else ExprType.STR


class Transition(BaseModel):
    """A widget interaction leaving a node. Field names follow the JSON model schema."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    transition_id: int
    kind: TransitionKind = Field(..., alias="type")
    active: bool = True
    guard: Optional[str] = None
    assignments: Optional[List[str]] = Field(default=None, alias="set")
    destination: str
    alt_destination: Optional[str] = None  # long-click target for buttons, second direction for scrolls
    crash: bool = False

    _guard_expr: Optional[GuardExpr] = PrivateAttr(default=None)
    _set_exprs: Tuple[Assignment, ...] = PrivateAttr(default=())

    def bind(self, guard_expr: Optional[GuardExpr], set_exprs: List[Assignment]):
        self._guard_expr = guard_expr
        self._set_exprs = tuple(set_exprs)

    @property
    def guard_expr(self) -> Optional[GuardExpr]:
        return self._guard_expr

    @property
    def set_exprs(self) -> Tuple[Assignment, ...]:
        return self._set_exprs

    def target(self, mode: int) -> str:
        """Destination for the given mode bit."""
        if self.alt_destination is not None and mode == 1 and self.kind in (
            TransitionKind.BUTTON, TransitionKind.SCROLL
        ):
            return self.alt_destination
        return self.destination


class Node(BaseModel):
    """An activity. Transition order defines widget-slot indices."""
    model_config = ConfigDict(frozen=True)

    node_id: str
    transitions: List[Transition] = Field(default_factory=list)
    external: bool = False
    crash_node: bool = False


class AppModel(BaseModel):
    """A deterministic FSM model of an app under test."""
    model_config = ConfigDict(frozen=True)

    global_vars: List[GlobalVar] = Field(default_factory=list)
    nodes: List[Node]
    initial_node: str
    string_pool: List[str]
    max_widget_slots: PositiveInt

    _node_index: Dict[str, int] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context):
        self._node_index = {node.node_id: i for i, node in enumerate(self.nodes)}

    @property
    def node_ids(self) -> List[str]:
        return [node.node_id for node in self.nodes]

    def has_node(self, node_id: str) -> bool:
        return node_id in self._node_index

    def node(self, node_id: str) -> Node:
        return self.nodes[self._node_index[node_id]]

    def index_of(self, node_id: str) -> int:
        return self._node_index[node_id]

    def is_external(self, destination: str) -> bool:
        return destination == EXTERNAL or (self.has_node(destination) and self.node(destination).external)

    @property
    def app_nodes(self) -> List[str]:
        return [node.node_id for node in self.nodes if not node.external]

    def declarations(self) -> Dict[str, ExprType]:
        declared = {var.name: var.type for var in self.global_vars}
        for name in SYSTEM_VARIABLES:
            declared.setdefault(name, ExprType.INT)
        return declared

    def initial_vars(self) -> Dict[str, Union[int, str]]:
        store: Dict[str, Union[int, str]] = dict(SYSTEM_VARIABLES)
        store.update({var.name: var.value for var in self.global_vars})
        return store


class Diagnostic(BaseModel):
    """One validation finding."""
    severity: Literal["error", "warning"]
    code: str
    message: str
    node_id: Optional[str] = None
    transition_id: Optional[int] = None

    def __str__(self) -> str:
        return f"{self.severity}: {self.message}"
