"""
Offline check: run a trace file through a spec and print the output trace.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable
from pathlib import Path
from typing import Optional

from app.stream import compile_spec, format_trace, parse_spec, parse_trace, parse_value, run_trace
from app.stream.spec import Scalar

logger = logging.getLogger(__name__)


def parse_assignments(items: Iterable[str]) -> dict[str, Scalar]:
    """Parse `name=value` constant overrides."""
    overrides: dict[str, Scalar] = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise ValueError(f"expected name=value, got {item!r}")
        overrides[name.strip()] = parse_value(value.strip())
    return overrides


def check(spec_path: Path, trace_path: Path,
          overrides: Optional[dict[str, Scalar]] = None) -> str:
    """
    Output trace of a spec on an input trace, in playground text form.

    Raises:
        SpecError: the spec does not parse or type-check
        TraceFormatError: a trace line is malformed
        StreamRuntimeError: the trace is not ordered or names unknown streams
    """
    spec = parse_spec(Path(spec_path).read_text())
    if overrides:
        spec = spec.with_constants(overrides)
    graph = compile_spec(spec)
    trace = parse_trace(Path(trace_path).read_text())
    outputs = run_trace(graph, trace)
    logger.debug(f"{len(trace)} input events -> {len(outputs)} output events")
    return format_trace(outputs)
