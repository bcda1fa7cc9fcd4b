"""
Guard and assignment expression language used in transition attributes.

Grammar, lowest to highest precedence:

    or_expr   := and_expr ("or" and_expr)*
    and_expr  := cmp_expr ("and" cmp_expr)*
    cmp_expr  := add_expr (("==" | "!=" | "<" | "<=" | ">" | ">=") add_expr)?
    add_expr  := unary (("+" | "-") unary)*
    unary     := "not" unary | "-" unary | primary
    primary   := INT | STRING | IDENT | "__input__" | "(" or_expr ")"

    assignment := IDENT "=" or_expr

Identifiers are resolved and type-checked against the model's variable
declarations while parsing, so evaluation of a parsed expression never
raises a type error.
"""

import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Union

from fatesim.utils.errors import (
    GuardEvaluationError,
    GuardNameError,
    GuardSyntaxError,
    GuardTypeError,
    MissingInputError,
)

INPUT_SYMBOL = "__input__"

Scalar = Union[int, str]
VariableStore = Mapping[str, Scalar]


class ExprType(str, Enum):
    INT = "int"
    STR = "str"
    BOOL = "bool"


# AST

@dataclass(frozen=True)
class IntLit:
    value: int
    type: ExprType = ExprType.INT


@dataclass(frozen=True)
class StrLit:
    value: str
    type: ExprType = ExprType.STR


@dataclass(frozen=True)
class Var:
    name: str
    type: ExprType


@dataclass(frozen=True)
class InputRef:
    type: ExprType = ExprType.STR


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "GuardExpr"
    type: ExprType


@dataclass(frozen=True)
class Binary:
    op: str
    left: "GuardExpr"
    right: "GuardExpr"
    type: ExprType


GuardExpr = Union[IntLit, StrLit, Var, InputRef, Unary, Binary]


@dataclass(frozen=True)
class Assignment:
    target: str
    expr: GuardExpr

    def __str__(self) -> str:
        return f"{self.target} = {to_source(self.expr)}"


COMPARISONS = ("==", "!=", "<", "<=", ">", ">=")
ORDERINGS = ("<", "<=", ">", ">=")
KEYWORDS = ("and", "or", "not")


# Lexer

_TOKEN_RE = re.compile(
    r'\s*(?:(?P<int>\d+)'
    r'|(?P<str>"(?:[^"\\]|\\.)*")'
    r'|(?P<name>[A-Za-z_][A-Za-z0-9_]*)'
    r'|(?P<op>==|!=|<=|>=|<|>|\+|-|\(|\)|=))'
)


@dataclass(frozen=True)
class Token:
    kind: str  # int, str, name, op, end
    text: str
    position: int


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(text, pos)
        if not match or match.end() == pos:
            offset = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise GuardSyntaxError(f"Unexpected character {text[offset]!r}", offset)
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append(Token(kind, match.group(kind), start))
        pos = match.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


def _unescape(literal: str) -> str:
    body = literal[1:-1]
    return re.sub(r"\\(.)", lambda m: m.group(1), body)


def _escape(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


# Parser

class _Parser:
    def __init__(self, text: str, declarations: Mapping[str, ExprType]):
        self.text = text
        self.declarations = declarations
        self.tokens = tokenize(text)
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        token = self.current
        return token.kind == kind and (text is None or token.text == text)

    def at_keyword(self, word: str) -> bool:
        return self.at("name", word)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        if not self.at(kind, text):
            token = self.current
            found = token.text or "end of input"
            raise GuardSyntaxError(f"Expected {text or kind}, found {found!r}", token.position)
        return self.advance()

    def expect_end(self):
        if not self.at("end"):
            token = self.current
            raise GuardSyntaxError(f"Unexpected token {token.text!r}", token.position)

    # precedence levels

    def parse_or(self) -> GuardExpr:
        left = self.parse_and()
        while self.at_keyword("or"):
            token = self.advance()
            right = self.parse_and()
            left = self._logical("or", left, right, token.position)
        return left

    def parse_and(self) -> GuardExpr:
        left = self.parse_cmp()
        while self.at_keyword("and"):
            token = self.advance()
            right = self.parse_cmp()
            left = self._logical("and", left, right, token.position)
        return left

    def parse_cmp(self) -> GuardExpr:
        left = self.parse_add()
        if self.at("op") and self.current.text in COMPARISONS:
            token = self.advance()
            right = self.parse_add()
            if left.type != right.type:
                raise GuardTypeError(
                    f"cannot compare {left.type.value} with {right.type.value}", token.position
                )
            if token.text in ORDERINGS and left.type != ExprType.INT:
                raise GuardTypeError(
                    f"operator {token.text} requires int operands, got {left.type.value}",
                    token.position,
                )
            left = Binary(token.text, left, right, ExprType.BOOL)
            if self.at("op") and self.current.text in COMPARISONS:
                raise GuardSyntaxError("Comparisons cannot be chained", self.current.position)
        return left

    def parse_add(self) -> GuardExpr:
        left = self.parse_unary()
        while self.at("op", "+") or self.at("op", "-"):
            token = self.advance()
            right = self.parse_unary()
            for operand in (left, right):
                if operand.type != ExprType.INT:
                    raise GuardTypeError(
                        f"operator {token.text} requires int operands, got {operand.type.value}",
                        token.position,
                    )
            left = Binary(token.text, left, right, ExprType.INT)
        return left

    def parse_unary(self) -> GuardExpr:
        if self.at_keyword("not"):
            token = self.advance()
            operand = self.parse_unary()
            if operand.type == ExprType.STR:
                raise GuardTypeError("'not' requires a boolean or int operand", token.position)
            return Unary("not", operand, ExprType.BOOL)
        if self.at("op", "-"):
            token = self.advance()
            operand = self.parse_unary()
            if operand.type != ExprType.INT:
                raise GuardTypeError("unary '-' requires an int operand", token.position)
            return Unary("-", operand, ExprType.INT)
        return self.parse_primary()

    def parse_primary(self) -> GuardExpr:
        token = self.current
        if token.kind == "int":
            self.advance()
            return IntLit(int(token.text))
        if token.kind == "str":
            self.advance()
            return StrLit(_unescape(token.text))
        if token.kind == "name":
            if token.text in KEYWORDS:
                raise GuardSyntaxError(f"Unexpected keyword {token.text!r}", token.position)
            self.advance()
            if token.text == INPUT_SYMBOL:
                return InputRef()
            if token.text not in self.declarations:
                raise GuardNameError(token.text, token.position)
            return Var(token.text, self.declarations[token.text])
        if self.at("op", "("):
            self.advance()
            inner = self.parse_or()
            self.expect("op", ")")
            return inner
        found = token.text or "end of input"
        raise GuardSyntaxError(f"Unexpected {found!r}", token.position)

    def _logical(self, op: str, left: GuardExpr, right: GuardExpr, position: int) -> GuardExpr:
        for operand in (left, right):
            if operand.type == ExprType.STR:
                raise GuardTypeError(f"'{op}' requires boolean or int operands", position)
        return Binary(op, left, right, ExprType.BOOL)


def parse_expr(text: str, declarations: Mapping[str, ExprType]) -> GuardExpr:
    """Parse and type-check an expression against variable declarations."""
    parser = _Parser(text, declarations)
    expr = parser.parse_or()
    parser.expect_end()
    return expr


def parse_guard(text: str, declarations: Mapping[str, ExprType]) -> GuardExpr:
    """Parse an expression that must be usable as a transition guard."""
    expr = parse_expr(text, declarations)
    if expr.type == ExprType.STR:
        raise GuardTypeError("guard must be boolean or int, got str", 0)
    if references_input(expr):
        raise GuardSyntaxError(f"Guards cannot read {INPUT_SYMBOL}; only assignments can", text.find(INPUT_SYMBOL))
    return expr


def parse_assignment(text: str, declarations: Mapping[str, ExprType]) -> Assignment:
    """Parse `target = expr`; the target must be a declared variable of the same type."""
    parser = _Parser(text, declarations)
    target = parser.expect("name")
    if target.text in KEYWORDS or target.text == INPUT_SYMBOL:
        raise GuardSyntaxError(f"Cannot assign to {target.text!r}", target.position)
    if target.text not in declarations:
        raise GuardNameError(target.text, target.position)
    equals = parser.expect("op", "=")
    expr = parser.parse_or()
    parser.expect_end()
    target_type = declarations[target.text]
    value_type = expr.type if expr.type != ExprType.BOOL else ExprType.INT
    if value_type != target_type:
        raise GuardTypeError(
            f"cannot assign {expr.type.value} to {target_type.value} variable '{target.text}'",
            equals.position,
        )
    return Assignment(target.text, expr)


def references_input(expr: GuardExpr) -> bool:
    match expr:
        case InputRef():
            return True
        case Unary(operand=operand):
            return references_input(operand)
        case Binary(left=left, right=right):
            return references_input(left) or references_input(right)
        case _:
            return False


# Evaluation

def eval_expr(expr: GuardExpr, vars: VariableStore, input: Optional[str] = None) -> Union[bool, int, str]:
    """Evaluate a parsed expression. Never mutates `vars`."""
    match expr:
        case IntLit(value=value) | StrLit(value=value):
            return value
        case Var(name=name):
            try:
                return vars[name]
            except KeyError:
                raise GuardEvaluationError(f"Variable '{name}' is not bound")
        case InputRef():
            if input is None:
                raise MissingInputError(f"Expression references {INPUT_SYMBOL} but no input was supplied")
            return input
        case Unary(op="not", operand=operand):
            return not eval_expr(operand, vars, input)
        case Unary(op="-", operand=operand):
            return -eval_expr(operand, vars, input)
        case Binary(op="and", left=left, right=right):
            return bool(eval_expr(left, vars, input)) and bool(eval_expr(right, vars, input))
        case Binary(op="or", left=left, right=right):
            return bool(eval_expr(left, vars, input)) or bool(eval_expr(right, vars, input))
        case Binary(op=op, left=left, right=right):
            lhs = eval_expr(left, vars, input)
            rhs = eval_expr(right, vars, input)
            return _BINARY_OPS[op](lhs, rhs)
    raise GuardEvaluationError(f"Unknown expression node {expr!r}")


_BINARY_OPS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
}


def exec_set(
    assignments: List[Assignment], vars: VariableStore, input: Optional[str] = None
) -> Dict[str, Scalar]:
    """Apply assignments in order on a copy of `vars`; each sees the prior updates."""
    updated = dict(vars)
    for assignment in assignments:
        value = eval_expr(assignment.expr, updated, input)
        if isinstance(value, bool):
            value = int(value)
        updated[assignment.target] = value
    return updated


# Printing

def to_source(expr: GuardExpr) -> str:
    """Render an expression so that parsing it again yields an equal AST."""
    return _format(expr, nested=False)


def _format(expr: GuardExpr, nested: bool) -> str:
    match expr:
        case IntLit(value=value):
            return str(value)
        case StrLit(value=value):
            return _escape(value)
        case Var(name=name):
            return name
        case InputRef():
            return INPUT_SYMBOL
        case Unary(op="not", operand=operand):
            return f"not {_format(operand, nested=True)}"
        case Unary(op=op, operand=operand):
            return f"{op}{_format(operand, nested=True)}"
        case Binary(op=op, left=left, right=right):
            text = f"{_format(left, nested=True)} {op} {_format(right, nested=True)}"
            return f"({text})" if nested else text
    raise ValueError(f"Unknown expression node {expr!r}")
