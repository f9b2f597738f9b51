"""
Timed events, traces and the playground trace format.

A trace file holds one event per line:

    <t>: <name> = <value>

with t in seconds (integer or decimal), value `true`/`false`, an integer or a
decimal number. Timestamps are stored as integer nanoseconds.
"""

from __future__ import annotations

import re
from collections.abc import Iterator
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import TYPE_CHECKING, Union

from .errors import TimestampRegressionError, TraceFormatError

if TYPE_CHECKING:
    from .graph import MonitorGraph

NS_PER_SECOND = 1_000_000_000

Scalar = Union[bool, int, float]

_LINE = re.compile(
    r"^\s*(?P<t>\d+(?:\.\d+)?)\s*:\s*(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>\S+)\s*$"
)
_INT = re.compile(r"^[+-]?\d+$")
_FLOAT = re.compile(r"^[+-]?(\d+\.\d*|\.\d+|\d+(\.\d*)?[eE][+-]?\d+|inf|nan)$", re.IGNORECASE)


def seconds_to_ns(seconds: Union[str, int, float, Decimal]) -> int:
    """Exact conversion; raises ValueError below nanosecond resolution."""
    try:
        value = Decimal(str(seconds)) * NS_PER_SECOND
    except InvalidOperation as e:
        raise ValueError(f"not a timestamp: {seconds!r}") from e
    if value != value.to_integral_value():
        raise ValueError(f"timestamp {seconds!r} is finer than 1 ns")
    if value < 0:
        raise ValueError(f"timestamp {seconds!r} is negative")
    return int(value)


def format_seconds(ns: int) -> str:
    """Nanoseconds as seconds text without exponent or trailing zeros."""
    whole, frac = divmod(ns, NS_PER_SECOND)
    if frac == 0:
        return str(whole)
    return f"{whole}.{frac:09d}".rstrip("0")


def parse_value(text: str) -> Scalar:
    if text == "true":
        return True
    if text == "false":
        return False
    if _INT.match(text):
        return int(text)
    if _FLOAT.match(text):
        return float(text)
    raise ValueError(f"not a scalar value: {text!r}")


def format_value(value: Scalar) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


@dataclass(frozen=True)
class TimedEvent:
    t: int          # ns
    value: Scalar

    @property
    def seconds(self) -> float:
        return self.t / NS_PER_SECOND


@dataclass
class Trace:
    """Ordered (stream, event) pairs; timestamps never decrease."""
    entries: list[tuple[str, TimedEvent]] = field(default_factory=list)

    def __post_init__(self) -> None:
        entries, self.entries = self.entries, []
        self._seen: set[tuple[str, int]] = set()
        for name, ev in entries:
            self.append(name, ev)

    def append(self, name: str, ev: TimedEvent) -> None:
        if ev.t < 0:
            raise TimestampRegressionError(f"{name}: negative timestamp {ev.t}")
        if self.entries and ev.t < self.entries[-1][1].t:
            previous = format_seconds(self.entries[-1][1].t)
            raise TimestampRegressionError(
                f"{name}: event at {format_seconds(ev.t)} after {previous}")
        if (name, ev.t) in self._seen:
            raise TimestampRegressionError(f"{name}: two events at {format_seconds(ev.t)}")
        self._seen.add((name, ev.t))
        self.entries.append((name, ev))

    def extend(self, events: list[tuple[str, TimedEvent]]) -> None:
        for name, ev in events:
            self.append(name, ev)

    def stream(self, name: str) -> list[TimedEvent]:
        return [ev for n, ev in self.entries if n == name]

    def __iter__(self) -> Iterator[tuple[str, TimedEvent]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def parse_trace(text: str) -> Trace:
    """
    Parse playground trace text.

    Raises:
        TraceFormatError: malformed line, mixed kinds on one stream, or a
            timestamp regression (with the 1-based line number)
    """
    trace = Trace()
    kinds: dict[str, bool] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        match = _LINE.match(line)
        if not match:
            raise TraceFormatError(
                f"expected '<t>: <name> = <value>', got {line.strip()!r}", lineno)
        try:
            t = seconds_to_ns(match["t"])
            value = parse_value(match["value"])
        except ValueError as e:
            raise TraceFormatError(str(e), lineno) from None
        name = match["name"]
        is_bool = isinstance(value, bool)
        if kinds.setdefault(name, is_bool) != is_bool:
            raise TraceFormatError(f"{name} mixes boolean and numeric values", lineno)
        try:
            trace.append(name, TimedEvent(t, value))
        except TimestampRegressionError as e:
            raise TraceFormatError(f"timestamp regression: {e}", lineno) from None
    return trace


def format_trace(trace: Trace) -> str:
    """Playground text, one LF-terminated line per event."""
    return "".join(
        f"{format_seconds(ev.t)}: {name} = {format_value(ev.value)}\n" for name, ev in trace
    )


def run_trace(graph: MonitorGraph, trace: Trace) -> Trace:
    """Run a whole trace through a fresh graph state and collect its outputs."""
    graph.reset()
    out = Trace()
    for name, ev in trace:
        out.extend(graph.push_event(name, ev))
    out.extend(graph.flush())
    return out
