"""
Loading, validation and transition lookup for FSM app models.
"""

import json
from collections import Counter, deque
from pathlib import Path
from typing import Any, Dict, List, Mapping, Union

from loguru import logger
from pydantic import ValidationError

from fatesim.model.app_model import AppModel, Diagnostic, EXTERNAL, Transition, TransitionKind
from fatesim.services.guard_lang import (
    INPUT_SYMBOL,
    Scalar,
    eval_expr,
    parse_assignment,
    parse_guard,
    references_input,
)
from fatesim.utils.errors import (
    GuardError,
    GuardEvaluationError,
    ModelError,
    ModelSyntaxError,
    ModelValidationError,
)


def parse_model(document: str) -> AppModel:
    """Parse a JSON model document into a fully resolved AppModel."""
    try:
        data = json.loads(document)
    except json.JSONDecodeError as e:
        raise ModelSyntaxError(e.msg, line=e.lineno, column=e.colno)
    return load_model(data)


def load_model_file(path: Union[str, Path]) -> AppModel:
    path = Path(path)
    logger.debug(f"Loading model from {path}")
    try:
        document = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ModelError(f"Cannot read model file {path}: {e}")
    return parse_model(document)


def load_model(data: Mapping[str, Any]) -> AppModel:
    """Build an AppModel from an already-decoded JSON document."""
    if not isinstance(data, Mapping):
        raise ModelSyntaxError("Model document must be a JSON object")
    if not data.get("nodes"):
        raise ModelValidationError([Diagnostic(severity="error", code="empty_model", message="empty model")])

    try:
        model = AppModel.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        location = ".".join(str(part) for part in error["loc"])
        raise ModelSyntaxError(f"{location}: {error['msg']}")

    blocking = [d for d in _resolution_diagnostics(model) if d.severity == "error"]
    if blocking:
        raise ModelValidationError(blocking)

    _bind_expressions(model)
    logger.debug(f"Model loaded: {len(model.nodes)} nodes, initial node '{model.initial_node}'")
    return model


def _bind_expressions(model: AppModel):
    declarations = model.declarations()
    for node in model.nodes:
        for transition in node.transitions:
            where = f"transition {node.node_id}/{transition.transition_id}"
            guard_expr = None
            if transition.guard is not None:
                try:
                    guard_expr = parse_guard(transition.guard, declarations)
                except GuardError as e:
                    raise ModelError(f"Cannot parse guard {transition.guard!r} of {where}: {e.message}") from e
            set_exprs = []
            for text in transition.assignments or []:
                try:
                    set_exprs.append(parse_assignment(text, declarations))
                except GuardError as e:
                    raise ModelError(f"Cannot parse assignment {text!r} of {where}: {e.message}") from e
            transition.bind(guard_expr, set_exprs)


def dump_model(model: AppModel) -> str:
    """Serialize a model back to the JSON schema it was parsed from."""
    return json.dumps(model.model_dump(mode="json", by_alias=True), indent=2)


def _resolution_diagnostics(model: AppModel) -> List[Diagnostic]:
    diagnostics: List[Diagnostic] = []

    node_counts = Counter(model.node_ids)
    for node_id, count in node_counts.items():
        if count > 1:
            diagnostics.append(Diagnostic(
                severity="error", code="duplicate_node",
                message=f"duplicate node identifier '{node_id}'", node_id=node_id,
            ))

    var_counts = Counter(var.name for var in model.global_vars)
    for name, count in var_counts.items():
        if count > 1:
            diagnostics.append(Diagnostic(
                severity="error", code="duplicate_variable", message=f"duplicate global variable '{name}'",
            ))

    if not model.has_node(model.initial_node):
        diagnostics.append(Diagnostic(
            severity="error", code="unknown_initial_node",
            message=f"initial node '{model.initial_node}' does not exist",
        ))

    for node in model.nodes:
        transition_counts = Counter(t.transition_id for t in node.transitions)
        for transition_id, count in transition_counts.items():
            if count > 1:
                diagnostics.append(Diagnostic(
                    severity="error", code="duplicate_transition",
                    message=f"duplicate transition identifier {transition_id} in node '{node.node_id}'",
                    node_id=node.node_id, transition_id=transition_id,
                ))
        for transition in node.transitions:
            for destination in (transition.destination, transition.alt_destination):
                if destination is None or destination == EXTERNAL or model.has_node(destination):
                    continue
                diagnostics.append(Diagnostic(
                    severity="error", code="unknown_destination",
                    message=(f"transition {node.node_id}/{transition.transition_id} "
                             f"points to missing node '{destination}'"),
                    node_id=node.node_id, transition_id=transition.transition_id,
                ))
    return diagnostics


def validate_model(model: AppModel) -> List[Diagnostic]:
    """Check every model invariant. Unreachable nodes are warnings, everything else errors."""
    diagnostics = _resolution_diagnostics(model)

    if not model.string_pool:
        diagnostics.append(Diagnostic(severity="error", code="empty_string_pool", message="string pool is empty"))

    largest = max((len(node.transitions) for node in model.nodes), default=0)
    if model.max_widget_slots < largest:
        diagnostics.append(Diagnostic(
            severity="error", code="too_few_widget_slots",
            message=f"max_widget_slots {model.max_widget_slots} is below the largest transition count {largest}",
        ))

    for node in model.nodes:
        if node.external and node.crash_node:
            diagnostics.append(Diagnostic(
                severity="error", code="external_crash_node",
                message=f"node '{node.node_id}' cannot be both external and a crash node", node_id=node.node_id,
            ))
        for transition in node.transitions:
            where = f"{node.node_id}/{transition.transition_id}"
            if transition.kind == TransitionKind.TEXT_FIELD and not any(
                references_input(a.expr) for a in transition.set_exprs
            ):
                diagnostics.append(Diagnostic(
                    severity="error", code="text_field_without_input",
                    message=f"text field {where} never assigns {INPUT_SYMBOL}",
                    node_id=node.node_id, transition_id=transition.transition_id,
                ))
            if transition.kind == TransitionKind.SCROLL and transition.alt_destination is None:
                diagnostics.append(Diagnostic(
                    severity="error", code="scroll_without_direction",
                    message=f"scroll {where} must define alt_destination for its second direction",
                    node_id=node.node_id, transition_id=transition.transition_id,
                ))

    if model.has_node(model.initial_node):
        reachable = _reachable_ignoring_guards(model)
        for node_id in model.node_ids:
            if node_id not in reachable:
                diagnostics.append(Diagnostic(
                    severity="warning", code="unreachable_node",
                    message=f"node '{node_id}' is unreachable from '{model.initial_node}'", node_id=node_id,
                ))

    for diagnostic in diagnostics:
        if diagnostic.severity == "warning":
            logger.warning(f"Model diagnostic: {diagnostic.message}")
    return diagnostics


def _reachable_ignoring_guards(model: AppModel) -> set:
    seen = {model.initial_node}
    queue = deque([model.initial_node])
    while queue:
        node = model.node(queue.popleft())
        for transition in node.transitions:
            if not transition.active:
                continue
            for destination in (transition.destination, transition.alt_destination):
                if destination and model.has_node(destination) and destination not in seen:
                    seen.add(destination)
                    queue.append(destination)
    return seen


def is_enabled(transition: Transition, vars: Mapping[str, Scalar]) -> bool:
    if not transition.active:
        return False
    if transition.guard_expr is None:
        return True
    return bool(eval_expr(transition.guard_expr, vars))


def enabled_transitions(model: AppModel, node: str, vars: Mapping[str, Scalar]) -> List[Transition]:
    """Active transitions of `node` whose guard holds under `vars`, in model order."""
    enabled = []
    for transition in model.node(node).transitions:
        try:
            if is_enabled(transition, vars):
                enabled.append(transition)
        except GuardEvaluationError as e:
            raise GuardEvaluationError(f"Transition {node}/{transition.transition_id}: {e.message}") from e
    return enabled


def enabled_slots(model: AppModel, node: str, vars: Mapping[str, Scalar]) -> List[int]:
    """Slot indices (positions in the node's transition list) that are enabled."""
    slots = []
    for slot, transition in enumerate(model.node(node).transitions):
        try:
            if is_enabled(transition, vars):
                slots.append(slot)
        except GuardEvaluationError as e:
            raise GuardEvaluationError(f"Transition {node}/{transition.transition_id}: {e.message}") from e
    return slots


def require_valid(model: AppModel) -> AppModel:
    """Raise ModelValidationError when `validate_model` reports any error."""
    errors = [d for d in validate_model(model) if d.severity == "error"]
    if errors:
        raise ModelValidationError(errors)
    return model
