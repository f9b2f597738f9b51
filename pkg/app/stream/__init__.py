"""Stream monitor engine: specification language, graph compiler and trace format."""

from .errors import (
    ArityError,
    DuplicateStreamError,
    IllegalCycleError,
    KindMismatchError,
    SpecError,
    SpecSyntaxError,
    StreamRuntimeError,
    TimestampRegressionError,
    TraceFormatError,
    UndefinedIdentifierError,
    UnknownStreamError,
)
from .graph import MonitorGraph, apply_op, coerce, compile_spec
from .parser import parse_spec
from .spec import Kind, MonitorSpec, TelegrafIn, TelegrafOut
from .trace import (
    NS_PER_SECOND,
    TimedEvent,
    Trace,
    format_seconds,
    format_trace,
    parse_trace,
    parse_value,
    run_trace,
    seconds_to_ns,
)

__all__ = [
    "ArityError",
    "DuplicateStreamError",
    "IllegalCycleError",
    "KindMismatchError",
    "SpecError",
    "SpecSyntaxError",
    "StreamRuntimeError",
    "TimestampRegressionError",
    "TraceFormatError",
    "UndefinedIdentifierError",
    "UnknownStreamError",
    "MonitorGraph",
    "apply_op",
    "coerce",
    "compile_spec",
    "parse_spec",
    "Kind",
    "MonitorSpec",
    "TelegrafIn",
    "TelegrafOut",
    "NS_PER_SECOND",
    "TimedEvent",
    "Trace",
    "format_seconds",
    "format_trace",
    "parse_trace",
    "parse_value",
    "run_trace",
    "seconds_to_ns",
]
