"""
Monitor specification model.

A MonitorSpec is the checked syntax tree of a specification: input
declarations, definitions and outputs. Kind rules shared by the parser and
the graph compiler live here as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Union

from .errors import ArityError, KindMismatchError, SpecError


class Kind(Enum):
    """Scalar kind of a stream."""
    INT = "Int"
    FLOAT = "Float"
    BOOL = "Bool"

    @property
    def numeric(self) -> bool:
        return self is not Kind.BOOL


Scalar = Union[bool, int, float]


def kind_of_value(value: Scalar) -> Kind:
    if isinstance(value, bool):
        return Kind.BOOL
    if isinstance(value, int):
        return Kind.INT
    return Kind.FLOAT


# Expression tree

@dataclass(frozen=True)
class Literal:
    value: Scalar

    @property
    def kind(self) -> Kind:
        return kind_of_value(self.value)


@dataclass(frozen=True)
class Ident:
    name: str
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str              # "-" or "!"
    operand: Expr


@dataclass(frozen=True)
class Binary:
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple[Expr, ...]
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class IfThenElse:
    cond: Expr
    then: Expr
    other: Expr


Expr = Union[Literal, Ident, Unary, Binary, Call, IfThenElse]

ARITHMETIC_OPS = ("+", "-", "*", "/")
COMPARISON_OPS = ("<", "<=", ">", ">=")
EQUALITY_OPS = ("==", "!=")
BOOLEAN_OPS = ("&&", "||")

# builtin name -> arity
BUILTINS = {
    "abs": 1,
    "min": 2,
    "max": 2,
    "merge": 2,
    "default": 2,
    "last": 2,
    "time": 1,
}


# Declarations

@dataclass(frozen=True)
class TelegrafIn:
    """Ingress binding: which message field feeds an input stream."""
    id: str
    tags: str
    field: str


@dataclass(frozen=True)
class TelegrafOut:
    """Egress binding: the name an output stream is published under."""
    name: str


@dataclass(frozen=True)
class InputDecl:
    name: str
    kind: Kind
    binding: Optional[TelegrafIn] = None


@dataclass(frozen=True)
class Definition:
    name: str
    expr: Expr
    declared_kind: Optional[Kind] = None


@dataclass(frozen=True)
class OutputDecl:
    name: str
    binding: Optional[TelegrafOut] = None


def constant_value(expr: Expr) -> Optional[Scalar]:
    """Value of a literal or a negated numeric literal, else None."""
    if isinstance(expr, Literal):
        return expr.value
    if (isinstance(expr, Unary) and expr.op == "-" and isinstance(expr.operand, Literal)
            and expr.operand.kind.numeric):
        return -expr.operand.value
    return None


@dataclass
class MonitorSpec:
    """Checked specification; `kinds` maps every stream name to its kind."""
    inputs: list[InputDecl] = field(default_factory=list)
    definitions: list[Definition] = field(default_factory=list)
    outputs: list[OutputDecl] = field(default_factory=list)
    kinds: dict[str, Kind] = field(default_factory=dict)
    annotation_decls: list[str] = field(default_factory=list)
    includes: list[str] = field(default_factory=list)

    def kind_of(self, name: str) -> Kind:
        return self.kinds[name]

    def constants(self) -> dict[str, Scalar]:
        """Definitions whose body is a plain literal."""
        found = {}
        for d in self.definitions:
            value = constant_value(d.expr)
            if value is not None:
                found[d.name] = value
        return found

    def with_constants(self, overrides: dict[str, Scalar]) -> MonitorSpec:
        """
        Copy of the spec with constant definitions replaced.

        Int constants accept only integral values, Float constants accept any
        number, Bool constants accept only booleans.
        """
        constants = self.constants()
        definitions = list(self.definitions)
        for name, value in overrides.items():
            if name not in constants:
                raise SpecError(f"{name!r} is not a constant definition")
            kind = self.kind_of(name)
            definitions = [
                replace(d, expr=Literal(_coerce_constant(name, value, kind)))
                if d.name == name else d
                for d in definitions
            ]
        return replace(self, definitions=definitions)


def _coerce_constant(name: str, value: Scalar, kind: Kind) -> Scalar:
    if kind is Kind.BOOL:
        if not isinstance(value, bool):
            raise KindMismatchError(f"constant {name!r} is Bool, got {value!r}")
        return value
    if isinstance(value, bool):
        raise KindMismatchError(f"constant {name!r} is {kind.value}, got {value!r}")
    if kind is Kind.FLOAT:
        return float(value)
    if isinstance(value, float):
        if not value.is_integer():
            raise KindMismatchError(f"constant {name!r} is Int, got {value!r}")
        return int(value)
    return value


def promote(left: Kind, right: Kind) -> Kind:
    """Result kind of a numeric operation."""
    if left is Kind.INT and right is Kind.INT:
        return Kind.INT
    return Kind.FLOAT


def operator_kind(op: str, args: list[Kind]) -> Kind:
    """
    Result kind of an operator or builtin applied to operands of `args` kinds.

    Raises KindMismatchError for incompatible operands and ArityError for a
    builtin called with the wrong number of arguments.
    """
    def numeric(*kinds: Kind) -> None:
        if not all(k.numeric for k in kinds):
            raise KindMismatchError(
                f"{op!r} needs numeric operands, got {', '.join(k.value for k in kinds)}")

    if op in BUILTINS and len(args) != BUILTINS[op]:
        raise ArityError(f"{op}() takes {BUILTINS[op]} argument(s), got {len(args)}")

    if op == "neg":
        numeric(*args)
        return args[0]
    if op == "not":
        if args[0] is not Kind.BOOL:
            raise KindMismatchError(f"'!' needs a Bool operand, got {args[0].value}")
        return Kind.BOOL
    if op in ARITHMETIC_OPS:
        numeric(*args)
        return Kind.FLOAT if op == "/" else promote(*args)
    if op in COMPARISON_OPS:
        numeric(*args)
        return Kind.BOOL
    if op in EQUALITY_OPS:
        if args[0].numeric != args[1].numeric:
            raise KindMismatchError(f"{op!r} compares {args[0].value} with {args[1].value}")
        return Kind.BOOL
    if op in BOOLEAN_OPS:
        if args != [Kind.BOOL, Kind.BOOL]:
            raise KindMismatchError(f"{op!r} needs Bool operands")
        return Kind.BOOL
    if op == "abs":
        numeric(*args)
        return args[0]
    if op in ("min", "max"):
        numeric(*args)
        return promote(*args)
    if op == "if":
        cond, then, other = args
        if cond is not Kind.BOOL:
            raise KindMismatchError(f"if-condition must be Bool, got {cond.value}")
        return _branch_kind(op, then, other)
    if op == "merge":
        if args[0] is not args[1]:
            raise KindMismatchError(f"merge of {args[0].value} and {args[1].value}")
        return args[0]
    if op == "default":
        return _branch_kind(op, args[0], args[1])
    if op == "last":
        return args[0]
    if op == "time":
        return Kind.FLOAT
    raise SpecError(f"unknown operator {op!r}")


def _branch_kind(op: str, a: Kind, b: Kind) -> Kind:
    if a.numeric and b.numeric:
        return promote(a, b)
    if a is b:
        return a
    raise KindMismatchError(f"{op} mixes {a.value} and {b.value}")


def expr_op(expr: Expr) -> str:
    """Operator name used by operator_kind for a non-leaf node."""
    if isinstance(expr, Unary):
        return "neg" if expr.op == "-" else "not"
    if isinstance(expr, Binary):
        return expr.op
    if isinstance(expr, Call):
        return expr.func
    if isinstance(expr, IfThenElse):
        return "if"
    raise TypeError(f"leaf expression {expr!r} has no operator")


def children(expr: Expr) -> tuple[Expr, ...]:
    if isinstance(expr, Unary):
        return (expr.operand,)
    if isinstance(expr, Binary):
        return (expr.left, expr.right)
    if isinstance(expr, Call):
        return expr.args
    if isinstance(expr, IfThenElse):
        return (expr.cond, expr.then, expr.other)
    return ()
