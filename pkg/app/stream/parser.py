"""
Parser for the monitor specification language.

Grammar (comments start with `--` or `#`):

    in <name>: Events[Int|Float|Bool]        optionally preceded by @TelegrafIn("id","tags","field")
    def <name> [: Events[<kind>]] = <expr>
    out <name>                                optionally preceded by @TelegrafOut("name")
    def @<Annotation>(<param>: <Type>, ...)   recorded, not interpreted
    include "<file>"                          recorded, not resolved

Expressions: literals, identifiers, unary - and !, binary
`* /`, `+ -`, `< <= > >=`, `== !=`, `&&`, `||` (tightest first),
`if c then a else b` and the builtins abs, min, max, merge, default, last, time.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Any, Optional

from arpeggio import EOF, NoMatch, ParserPython, PTNodeVisitor, ZeroOrMore, visit_parse_tree
from arpeggio import Optional as Opt
from arpeggio import RegExMatch as _

from .errors import (
    DuplicateStreamError,
    KindMismatchError,
    SpecSyntaxError,
    UndefinedIdentifierError,
)
from .spec import (
    BUILTINS,
    Binary,
    Call,
    Definition,
    Expr,
    Ident,
    IfThenElse,
    InputDecl,
    Kind,
    Literal,
    MonitorSpec,
    OutputDecl,
    TelegrafIn,
    TelegrafOut,
    Unary,
    children,
    expr_op,
    operator_kind,
)

logger = logging.getLogger(__name__)

_KEYWORDS = r"(in|def|out|if|then|else|true|false|include)\b"


# --- Grammar ---

def ident():
    return _(rf"(?!{_KEYWORDS})[A-Za-z_][A-Za-z0-9_]*")


def kind_name():
    return _(r"(Int|Float|Bool)\b")


def stream_type():
    return "Events", "[", kind_name, "]"


def string():
    return _(r'"[^"\n]*"')


def annotation_name():
    return _(r"[A-Za-z_][A-Za-z0-9_]*")


def annotation():
    return "@", annotation_name, Opt("(", Opt(string, ZeroOrMore(",", string)), ")")


def param():
    return ident, ":", _(r"[A-Za-z_][A-Za-z0-9_]*")


def annotation_decl():
    return _(r"def\b"), "@", annotation_name, "(", Opt(param, ZeroOrMore(",", param)), ")"


def input_decl():
    return ZeroOrMore(annotation), _(r"in\b"), ident, ":", stream_type


def definition():
    return _(r"def\b"), ident, Opt(":", stream_type), "=", expression


def output_decl():
    return ZeroOrMore(annotation), _(r"out\b"), ident


def include():
    return _(r"include\b"), string


def statement():
    return [annotation_decl, input_decl, definition, output_decl, include]


def program():
    return ZeroOrMore(statement), EOF


def expression():
    return [conditional, disjunction]


def conditional():
    return _(r"if\b"), expression, _(r"then\b"), expression, _(r"else\b"), expression


def disjunction():
    return conjunction, ZeroOrMore(or_op, conjunction)


def conjunction():
    return equality, ZeroOrMore(and_op, equality)


def equality():
    return comparison, ZeroOrMore(eq_op, comparison)


def comparison():
    return additive, ZeroOrMore(cmp_op, additive)


def additive():
    return multiplicative, ZeroOrMore(add_op, multiplicative)


def multiplicative():
    return unary, ZeroOrMore(mul_op, unary)


def unary():
    return [(unary_op, unary), primary]


def primary():
    return [call, number, boolean, ident, ("(", expression, ")")]


def call():
    return ident, "(", Opt(expression, ZeroOrMore(",", expression)), ")"


def number():
    return _(r"\d+(\.\d+)?([eE][+-]?\d+)?")


def boolean():
    return _(r"(true|false)\b")


def or_op():
    return _(r"\|\|")


def and_op():
    return _(r"&&")


def eq_op():
    return _(r"==|!=")


def cmp_op():
    return _(r"<=|>=|<|>")


def add_op():
    return _(r"[+-]")


def mul_op():
    return _(r"[*/]")


def unary_op():
    return _(r"[-!]")


def comment():
    return _(r"(--|#)[^\n]*")


# --- Parse tree -> statements ---

@dataclass(frozen=True)
class _Token:
    text: str


@dataclass(frozen=True)
class _Str:
    text: str


@dataclass(frozen=True)
class _Name:
    text: str


@dataclass(frozen=True)
class _Annotation:
    name: str
    args: tuple[str, ...]
    line: int
    column: int


@dataclass(frozen=True)
class _AnnotationDecl:
    name: str


@dataclass(frozen=True)
class _Include:
    path: str


def _meaningful(items: Any) -> list:
    """Drop punctuation and keywords, which come through as plain strings."""
    return [c for c in items if not isinstance(c, str)]


class _SpecVisitor(PTNodeVisitor):
    def __init__(self, parser: ParserPython):
        super().__init__()
        self._parser = parser

    def _linecol(self, node) -> tuple[int, int]:
        line, col = self._parser.pos_to_linecol(node.position)
        return line, col

    # terminals

    def visit_ident(self, node, children):
        line, col = self._linecol(node)
        return Ident(node.value, line, col)

    def visit_number(self, node, children):
        text = node.value
        if any(c in text for c in ".eE"):
            return Literal(float(text))
        return Literal(int(text))

    def visit_boolean(self, node, children):
        return Literal(node.value == "true")

    def visit_kind_name(self, node, children):
        return Kind(node.value)

    def visit_string(self, node, children):
        return _Str(node.value[1:-1])

    def visit_annotation_name(self, node, children):
        return _Name(node.value)

    def _token(self, node, children):
        return _Token(node.value)

    visit_or_op = visit_and_op = visit_eq_op = visit_cmp_op = _token
    visit_add_op = visit_mul_op = visit_unary_op = _token

    # expressions

    def _fold(self, node, children):
        items = _meaningful(children)
        result = items[0]
        for i in range(1, len(items), 2):
            result = Binary(items[i].text, result, items[i + 1])
        return result

    visit_disjunction = visit_conjunction = visit_equality = _fold
    visit_comparison = visit_additive = visit_multiplicative = _fold

    def visit_unary(self, node, children):
        items = _meaningful(children)
        if len(items) == 2:
            return Unary(items[0].text, items[1])
        return items[0]

    def visit_primary(self, node, children):
        return _meaningful(children)[0]

    def visit_expression(self, node, children):
        return _meaningful(children)[0]

    def visit_conditional(self, node, children):
        cond, then, other = _meaningful(children)
        return IfThenElse(cond, then, other)

    def visit_call(self, node, children):
        items = _meaningful(children)
        head = items[0]
        return Call(head.name, tuple(items[1:]), head.line, head.column)

    # declarations

    def visit_stream_type(self, node, children):
        return _meaningful(children)[0]

    def visit_annotation(self, node, children):
        items = _meaningful(children)
        line, col = self._linecol(node)
        return _Annotation(items[0].text, tuple(s.text for s in items[1:]), line, col)

    def visit_param(self, node, children):
        return None

    def visit_annotation_decl(self, node, children):
        return _AnnotationDecl(_meaningful(children)[0].text)

    def visit_include(self, node, children):
        return _Include(_meaningful(children)[0].text)

    def visit_input_decl(self, node, children):
        items = _meaningful(children)
        annotations = [a for a in items if isinstance(a, _Annotation)]
        name, kind = [i for i in items if not isinstance(i, _Annotation)]
        binding = None
        for ann in annotations:
            if ann.name != "TelegrafIn" or len(ann.args) != 3:
                raise SpecSyntaxError(
                    f"input annotation must be @TelegrafIn(id, tags, field), got @{ann.name}",
                    ann.line, ann.column)
            binding = TelegrafIn(*ann.args)
        return InputDecl(name.name, kind, binding)

    def visit_output_decl(self, node, children):
        items = _meaningful(children)
        annotations = [a for a in items if isinstance(a, _Annotation)]
        name = items[-1]
        binding = None
        for ann in annotations:
            if ann.name != "TelegrafOut" or len(ann.args) != 1:
                raise SpecSyntaxError(
                    f"output annotation must be @TelegrafOut(name), got @{ann.name}",
                    ann.line, ann.column)
            binding = TelegrafOut(ann.args[0])
        return OutputDecl(name.name, binding)

    def visit_definition(self, node, children):
        items = _meaningful(children)
        name, expr = items[0], items[-1]
        declared = items[1] if len(items) == 3 else None
        return Definition(name.name, expr, declared)

    def visit_statement(self, node, children):
        return _meaningful(children)[0]

    def visit_program(self, node, children):
        return _meaningful(children)


_parser: Optional[ParserPython] = None
_parser_lock = threading.Lock()


def _get_parser() -> ParserPython:
    global _parser
    with _parser_lock:
        if _parser is None:
            _parser = ParserPython(program, comment, ignore_case=False)
    return _parser


def parse_spec(text: str) -> MonitorSpec:
    """
    Parse and check a monitor specification.

    Raises:
        SpecSyntaxError: text does not match the grammar
        UndefinedIdentifierError: reference to an undeclared stream or function
        DuplicateStreamError: a name is declared twice
        KindMismatchError: operands of incompatible kinds
    """
    parser = _get_parser()
    with _parser_lock:
        try:
            tree = parser.parse(text)
        except NoMatch as e:
            line = getattr(e, "line", None)
            col = getattr(e, "col", None)
            if line is None:
                line, col = parser.pos_to_linecol(e.position)
            raise SpecSyntaxError(str(e), line, col) from None
        statements = visit_parse_tree(tree, _SpecVisitor(parser))
    return _build_spec(statements or [])


def _build_spec(statements: list) -> MonitorSpec:
    spec = MonitorSpec()
    declared: set[str] = set()

    def declare(name: str) -> None:
        if name in declared:
            raise DuplicateStreamError(f"stream {name!r} declared twice")
        declared.add(name)

    for stmt in statements:
        if isinstance(stmt, InputDecl):
            declare(stmt.name)
            spec.inputs.append(stmt)
        elif isinstance(stmt, Definition):
            declare(stmt.name)
            spec.definitions.append(stmt)
        elif isinstance(stmt, OutputDecl):
            spec.outputs.append(stmt)
        elif isinstance(stmt, _AnnotationDecl):
            spec.annotation_decls.append(stmt.name)
        elif isinstance(stmt, _Include):
            spec.includes.append(stmt.path)

    for d in spec.definitions:
        _check_names(d.expr, declared)
    seen_outputs: set[str] = set()
    for o in spec.outputs:
        if o.name not in declared:
            raise UndefinedIdentifierError(o.name)
        if o.name in seen_outputs:
            raise DuplicateStreamError(f"output {o.name!r} declared twice")
        seen_outputs.add(o.name)

    spec.kinds = _infer_kinds(spec)
    logger.debug(f"Parsed spec: {len(spec.inputs)} inputs, {len(spec.definitions)} definitions, "
                 f"{len(spec.outputs)} outputs")
    return spec


def _check_names(expr: Expr, declared: set[str]) -> None:
    if isinstance(expr, Ident):
        if expr.name not in declared:
            raise UndefinedIdentifierError(expr.name, expr.line, expr.column)
        return
    if isinstance(expr, Call) and expr.func not in BUILTINS:
        raise UndefinedIdentifierError(expr.func, expr.line, expr.column)
    for child in children(expr):
        _check_names(child, declared)


def _infer(expr: Expr, kinds: dict[str, Kind]) -> Optional[Kind]:
    """Kind of expr, or None while it depends on a stream of unknown kind."""
    if isinstance(expr, Literal):
        return expr.kind
    if isinstance(expr, Ident):
        return kinds.get(expr.name)
    if isinstance(expr, Call) and len(expr.args) == 2 and expr.func in ("default", "last"):
        first = _infer(expr.args[0], kinds)
        if expr.func == "last":
            return first
        second = _infer(expr.args[1], kinds)
        if first is None or second is None:
            return first or second
    args = [_infer(c, kinds) for c in children(expr)]
    if any(a is None for a in args):
        return None
    return operator_kind(expr_op(expr), args)  # type: ignore[arg-type]


def _infer_kinds(spec: MonitorSpec) -> dict[str, Kind]:
    """
    Assign a kind to every stream.

    Definitions are inferred to a fixpoint. A definition that only refers to
    itself through last() takes its declared kind, or Int, and is widened to
    Float if its body says so.
    """
    kinds: dict[str, Kind] = {i.name: i.kind for i in spec.inputs}
    pending = list(spec.definitions)
    progress = True
    while pending and progress:
        progress = False
        for d in list(pending):
            kind = _infer(d.expr, kinds)
            if kind is not None:
                kinds[d.name] = _declared(d, kind)
                pending.remove(d)
                progress = True
    for d in pending:
        kinds[d.name] = d.declared_kind or Kind.INT

    for _ in range(len(spec.definitions) + 1):
        changed = False
        for d in spec.definitions:
            kind = _declared(d, _infer(d.expr, kinds))  # type: ignore[arg-type]
            if kind != kinds[d.name]:
                if kinds[d.name] is Kind.INT and kind is Kind.FLOAT:
                    kinds[d.name] = kind
                    changed = True
                else:
                    raise KindMismatchError(
                        f"{d.name!r} is used as {kinds[d.name].value} but defined as {kind.value}")
        if not changed:
            break
    return kinds


def _declared(d: Definition, inferred: Kind) -> Kind:
    if d.declared_kind is None or d.declared_kind is inferred:
        return inferred
    if d.declared_kind is Kind.FLOAT and inferred is Kind.INT:
        return Kind.FLOAT
    raise KindMismatchError(
        f"{d.name!r} declared Events[{d.declared_kind.value}] but is {inferred.value}")
