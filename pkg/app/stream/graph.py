"""
Compiled monitor graph and its incremental evaluator.

Every operator of a MonitorSpec becomes one node. Nodes are evaluated in
topological order once per timestamp (a synchronous macro-step): all input
events at time t are absorbed first, then each node fires at most once, then
last-known values are updated. Lifted operators fire when any operand has an
event at t and every operand has a value.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any, Optional, Union

import networkx as nx

from .errors import (
    ArityError,
    IllegalCycleError,
    KindMismatchError,
    SpecError,
    TimestampRegressionError,
    UnknownStreamError,
)
from .spec import (
    BUILTINS,
    Binary,
    Call,
    Expr,
    Ident,
    IfThenElse,
    Kind,
    Literal,
    MonitorSpec,
    Scalar,
    TelegrafIn,
    TelegrafOut,
    Unary,
    constant_value,
    kind_of_value,
    operator_kind,
)
from .trace import NS_PER_SECOND, TimedEvent

logger = logging.getLogger(__name__)

_INT_MIN = -(2**63)
_INT_RANGE = 2**64

# operators that fire under signal-lift semantics
LIFTED_OPS = frozenset({
    "neg", "not", "+", "-", "*", "/", "<", "<=", ">", ">=", "==", "!=", "&&", "||",
    "abs", "min", "max", "if", "float",
})


def _wrap_int(value: int) -> int:
    """Two's complement wrap to 64 bits."""
    return (value - _INT_MIN) % _INT_RANGE + _INT_MIN


def _divide(a: float, b: float) -> float:
    if b == 0:
        if a == 0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def apply_op(op: str, args: list[Scalar], kind: Kind) -> Scalar:
    """
    Value of a lifted operator on concrete operand values.

    The result is coerced to `kind`: Int results wrap to 64 bits, Float
    results are converted with float().
    """
    if op == "neg":
        value: Scalar = -args[0]
    elif op == "not":
        value = not args[0]
    elif op == "+":
        value = args[0] + args[1]
    elif op == "-":
        value = args[0] - args[1]
    elif op == "*":
        value = args[0] * args[1]
    elif op == "/":
        value = _divide(float(args[0]), float(args[1]))
    elif op == "<":
        value = args[0] < args[1]
    elif op == "<=":
        value = args[0] <= args[1]
    elif op == ">":
        value = args[0] > args[1]
    elif op == ">=":
        value = args[0] >= args[1]
    elif op == "==":
        value = args[0] == args[1]
    elif op == "!=":
        value = args[0] != args[1]
    elif op == "&&":
        value = args[0] and args[1]
    elif op == "||":
        value = args[0] or args[1]
    elif op == "abs":
        value = abs(args[0])
    elif op == "min":
        value = args[0] if args[0] <= args[1] or math.isnan(args[0]) else args[1]
    elif op == "max":
        value = args[0] if args[0] >= args[1] or math.isnan(args[0]) else args[1]
    elif op == "if":
        value = args[1] if args[0] else args[2]
    elif op == "float":
        value = args[0]
    else:
        raise SpecError(f"unknown operator {op!r}")
    return coerce(value, kind)


def coerce(value: Scalar, kind: Kind) -> Scalar:
    if kind is Kind.BOOL:
        return bool(value)
    if kind is Kind.FLOAT:
        return float(value)
    return _wrap_int(int(value))


@dataclass
class Node:
    """One operator of the compiled graph."""
    index: int
    op: str                       # input, literal, a lifted op, merge, default, last, time
    args: tuple[int, ...]
    kind: Kind
    name: Optional[str] = None    # stream name for inputs and definition roots
    value: Any = None             # literal value / default initial value


class _Ref:
    """Placeholder for a definition referenced before its node exists."""

    def __init__(self, name: str):
        self.name = name


_Arg = Union[int, _Ref]


class _Compiler:
    def __init__(self, spec: MonitorSpec):
        self.spec = spec
        self.nodes: list[Node] = []
        self.pending_args: dict[int, tuple[_Arg, ...]] = {}
        self.inputs: dict[str, int] = {}
        self.roots: dict[str, _Arg] = {}

    def add(self, op: str, args: tuple[_Arg, ...], kind: Kind, value: Any = None) -> int:
        index = len(self.nodes)
        self.nodes.append(Node(index, op, (), kind, value=value))
        self.pending_args[index] = args
        return index

    def kind_of(self, arg: _Arg) -> Kind:
        if isinstance(arg, _Ref):
            return self.spec.kind_of(arg.name)
        return self.nodes[arg].kind

    def expr(self, expr: Expr) -> _Arg:
        if isinstance(expr, Literal):
            return self.add("literal", (), expr.kind, expr.value)
        if isinstance(expr, Ident):
            if expr.name in self.inputs:
                return self.inputs[expr.name]
            return _Ref(expr.name)
        if isinstance(expr, Unary):
            operand = self.expr(expr.operand)
            op = "neg" if expr.op == "-" else "not"
            return self.add(op, (operand,), operator_kind(op, [self.kind_of(operand)]))
        if isinstance(expr, Binary):
            left, right = self.expr(expr.left), self.expr(expr.right)
            kind = operator_kind(expr.op, [self.kind_of(left), self.kind_of(right)])
            return self.add(expr.op, (left, right), kind)
        if isinstance(expr, IfThenElse):
            args = (self.expr(expr.cond), self.expr(expr.then), self.expr(expr.other))
            return self.add("if", args, operator_kind("if", [self.kind_of(a) for a in args]))
        if isinstance(expr, Call):
            return self.call(expr)
        raise SpecError(f"cannot compile {expr!r}")

    def call(self, expr: Call) -> _Arg:
        if expr.func not in BUILTINS:
            raise SpecError(f"unknown function {expr.func!r}")
        if len(expr.args) != BUILTINS[expr.func]:
            raise ArityError(
                f"{expr.func}() takes {BUILTINS[expr.func]} argument(s), got {len(expr.args)}")
        if expr.func == "default":
            initial = constant_value(expr.args[1])
            if initial is None:
                raise ArityError("default() needs a literal as its second argument")
            stream = self.expr(expr.args[0])
            kind = operator_kind("default", [self.kind_of(stream), kind_of_value(initial)])
            return self.add("default", (stream,), kind, coerce(initial, kind))
        args = tuple(self.expr(a) for a in expr.args)
        kind = operator_kind(expr.func, [self.kind_of(a) for a in args])
        return self.add(expr.func, args, kind)

    def resolve(self, arg: _Arg) -> int:
        seen: list[str] = []
        while isinstance(arg, _Ref):
            if arg.name in seen:
                raise IllegalCycleError(f"cycle through {' -> '.join(seen + [arg.name])}")
            seen.append(arg.name)
            arg = self.roots[arg.name]
        return arg

    def fold_constants(self) -> None:
        """Lifted operators whose operands are all literals become literals."""
        changed = True
        while changed:
            changed = False
            for node in self.nodes:
                if (node.op in LIFTED_OPS and node.args
                        and all(self.nodes[a].op == "literal" for a in node.args)):
                    values = [self.nodes[a].value for a in node.args]
                    node.value = apply_op(node.op, values, node.kind)
                    node.op, node.args = "literal", ()
                    changed = True

    def build(self) -> MonitorGraph:
        for decl in self.spec.inputs:
            index = self.add("input", (), decl.kind)
            self.nodes[index].name = decl.name
            self.inputs[decl.name] = index
            self.roots[decl.name] = index

        for d in self.spec.definitions:
            root = self.expr(d.expr)
            declared = self.spec.kind_of(d.name)
            if declared is Kind.FLOAT and self.kind_of(root) is Kind.INT:
                root = self.add("float", (root,), Kind.FLOAT)
            self.roots[d.name] = root

        for index, args in self.pending_args.items():
            self.nodes[index].args = tuple(self.resolve(a) for a in args)
        self.fold_constants()
        streams = {name: self.resolve(root) for name, root in self.roots.items()}
        for name, index in streams.items():
            if self.nodes[index].name is None:
                self.nodes[index].name = name

        for node in self.nodes:
            expected = operator_kind_for(node, self.nodes)
            if expected is not None and expected is not node.kind:
                raise KindMismatchError(
                    f"stream {node.name or node.index!r} resolved to {expected.value}, "
                    f"expected {node.kind.value}")

        graph = nx.DiGraph()
        graph.add_nodes_from(range(len(self.nodes)))
        for node in self.nodes:
            for position, arg in enumerate(node.args):
                if node.op == "last" and position == 0:
                    continue
                graph.add_edge(arg, node.index)
        if not nx.is_directed_acyclic_graph(graph):
            cycle = nx.find_cycle(graph)
            names = [self.nodes[u].name or f"#{u}" for u, _ in cycle]
            raise IllegalCycleError(f"cycle not broken by last(): {' -> '.join(names)}")

        outputs = [(o.name, streams[o.name]) for o in self.spec.outputs]
        return MonitorGraph(self.spec, self.nodes, graph, self.inputs, outputs)


def operator_kind_for(node: Node, nodes: list[Node]) -> Optional[Kind]:
    """Kind a node should have given its resolved operands; None for leaves."""
    if node.op in ("input", "literal"):
        return None
    if node.op == "default":
        return operator_kind("default", [nodes[node.args[0]].kind, kind_of_value(node.value)])
    if node.op == "float":
        return Kind.FLOAT
    return operator_kind(node.op, [nodes[a].kind for a in node.args])


def compile_spec(spec: MonitorSpec) -> MonitorGraph:
    """
    Compile a checked spec into an executable graph.

    Raises:
        IllegalCycleError: a dependency cycle does not pass through last()
        ArityError: builtin with the wrong number or shape of arguments
    """
    graph = _Compiler(spec).build()
    logger.debug(f"Compiled monitor graph with {len(graph.nodes)} nodes")
    return graph


OutputEvent = tuple[str, TimedEvent]


class MonitorGraph:
    """
    Executable monitor.

    Not thread-safe: calls on one instance must be serialized.
    """

    def __init__(
        self,
        spec: MonitorSpec,
        nodes: list[Node],
        dag: nx.DiGraph,
        inputs: dict[str, int],
        outputs: list[tuple[str, int]],
    ):
        self.spec = spec
        self.nodes = nodes
        self.dag = dag
        self.inputs = inputs
        self.outputs = outputs
        self.order = list(nx.lexicographical_topological_sort(dag))
        self._position = {index: pos for pos, index in enumerate(self.order)}
        # nodes an event on each input can reach, in evaluation order
        self._affected = {
            index: sorted(nx.descendants(dag, index) | {index}, key=self._position.__getitem__)
            for index in inputs.values()
        }
        self.reset()

    @property
    def input_names(self) -> list[str]:
        return list(self.inputs)

    @property
    def output_names(self) -> list[str]:
        return [name for name, _ in self.outputs]

    def bindings(self) -> tuple[dict[str, TelegrafIn], dict[str, TelegrafOut]]:
        """Field bindings of annotated inputs and publish names of annotated outputs."""
        ingress = {i.name: i.binding for i in self.spec.inputs if i.binding is not None}
        egress = {o.name: o.binding for o in self.spec.outputs if o.binding is not None}
        return ingress, egress

    def reset(self) -> None:
        """Forget all events and last-known values."""
        self._last: list[Optional[Scalar]] = [None] * len(self.nodes)
        for node in self.nodes:
            if node.op in ("literal", "default"):
                self._last[node.index] = node.value
        self._pending_t: Optional[int] = None
        self._pending: dict[int, Scalar] = {}
        self._closed_t: Optional[int] = None
        self._stream_t: dict[str, int] = {}

    def push_event(self, stream: str, ev: TimedEvent) -> list[OutputEvent]:
        """
        Feed one input event.

        Returns the outputs of every timestamp that is complete, which is the
        pending one once an event with a later timestamp arrives. Call flush()
        after the last event.
        """
        index = self.inputs.get(stream)
        if index is None:
            raise UnknownStreamError(
                f"{stream!r} is not an input stream (inputs: {', '.join(self.input_names)})")
        previous = self._stream_t.get(stream)
        if previous is not None and ev.t <= previous:
            raise TimestampRegressionError(
                f"{stream}: event at {ev.t} ns after event at {previous} ns")
        if ev.t < (self._pending_t or 0) or (self._closed_t is not None and ev.t <= self._closed_t):
            raise TimestampRegressionError(
                f"{stream}: event at {ev.t} ns is not after the evaluated timestamps")

        value = self._check_input(stream, self.nodes[index].kind, ev.value)
        outputs: list[OutputEvent] = []
        if self._pending_t is not None and ev.t > self._pending_t:
            outputs = self.flush()
        self._pending_t = ev.t
        self._pending[index] = value
        self._stream_t[stream] = ev.t
        return outputs

    def flush(self) -> list[OutputEvent]:
        """Evaluate the pending timestamp, if any."""
        if self._pending_t is None:
            return []
        t, inputs = self._pending_t, self._pending
        self._pending_t, self._pending = None, {}
        self._closed_t = t
        return self._macro_step(t, inputs)

    def step(self, t: int, inputs: Mapping[str, Scalar]) -> list[OutputEvent]:
        """Push simultaneous events at t and evaluate them at once."""
        outputs: list[OutputEvent] = []
        for name, value in inputs.items():
            outputs.extend(self.push_event(name, TimedEvent(t, value)))
        outputs.extend(self.flush())
        return outputs

    def _check_input(self, stream: str, kind: Kind, value: Scalar) -> Scalar:
        actual = kind_of_value(value)
        if actual is kind:
            return value
        if kind is Kind.FLOAT and actual is Kind.INT:
            return float(value)
        raise KindMismatchError(f"{stream} is {kind.value}, got {value!r}")

    def _macro_step(self, t: int, inputs: dict[int, Scalar]) -> list[OutputEvent]:
        if len(inputs) == 1:
            affected = self._affected[next(iter(inputs))]
        else:
            touched: set[int] = set()
            for index in inputs:
                touched.update(self._affected[index])
            affected = sorted(touched, key=self._position.__getitem__)

        events: dict[int, Scalar] = {}
        last = self._last
        for index in affected:
            node = self.nodes[index]
            op = node.op
            if op == "input":
                if index in inputs:
                    events[index] = inputs[index]
            elif op in LIFTED_OPS:
                if not any(a in events for a in node.args):
                    continue
                values = [events[a] if a in events else last[a] for a in node.args]
                if any(v is None for v in values):
                    continue
                events[index] = apply_op(op, values, node.kind)  # type: ignore[arg-type]
            elif op == "merge":
                a, b = node.args
                if a in events:
                    events[index] = events[a]
                elif b in events:
                    events[index] = events[b]
            elif op == "default":
                source = node.args[0]
                if source in events:
                    events[index] = coerce(events[source], node.kind)
            elif op == "last":
                values, trigger = node.args
                if trigger in events and last[values] is not None:
                    events[index] = last[values]  # type: ignore[assignment]
            elif op == "time":
                if node.args[0] in events:
                    events[index] = t / NS_PER_SECOND

        for index, value in events.items():
            last[index] = value

        result = [(name, TimedEvent(t, events[index]))
                  for name, index in self.outputs if index in events]
        if result:
            logger.debug(f"t={t}ns: {len(result)} output event(s)")
        return result
