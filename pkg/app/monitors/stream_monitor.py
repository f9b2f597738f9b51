"""
P2 evaluated through the stream engine.

Runs specs/p2_tolerance.tessla with the monitor constants injected, one
macro-step per evaluated state. Results match check_p2 followed by
optimize_actual_speed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from app.core.models import MonitorConfig
from app.stream import NS_PER_SECOND, compile_spec, parse_spec

logger = logging.getLogger(__name__)

P2_SPEC_NAME = "p2_tolerance.tessla"


def default_spec_path() -> Path:
    """The shipped P2 spec, from the installed package or the source tree."""
    app_dir = Path(__file__).resolve().parent.parent
    packaged = app_dir / "specs" / P2_SPEC_NAME
    if packaged.exists():
        return packaged
    return app_dir.parent / "specs" / P2_SPEC_NAME


@dataclass(frozen=True)
class P2Result:
    ok: bool
    diff: float
    adjusted: float       # corrected expected speed
    changed: bool


class StreamP2Monitor:
    """P2 monitor backed by the DSL spec."""

    def __init__(self, cfg: MonitorConfig, spec_path: Optional[Path] = None):
        path = Path(spec_path) if spec_path else default_spec_path()
        spec = parse_spec(path.read_text()).with_constants({
            "delta": cfg.delta,
            "gain": cfg.gain,
            "vMax": cfg.v_max,
            "oneSided": cfg.p2_one_sided,
        })
        self.graph = compile_spec(spec)
        self._expected, self._actual = self._resolve_inputs()
        self._tick = 0
        logger.debug(f"Loaded P2 stream monitor from {path}")

    def _resolve_inputs(self) -> tuple[str, str]:
        """Input stream names, found through @TelegrafIn field bindings."""
        ingress, _ = self.graph.bindings()
        by_field = {b.field: name for name, b in ingress.items()}
        return (by_field.get("expectedSpeed", "expectedSpeed"),
                by_field.get("actualSpeed", "actualSpeed"))

    def reset(self) -> None:
        self.graph.reset()
        self._tick = 0

    def evaluate(self, expected: float, actual: float) -> P2Result:
        """Evaluate one (expected, actual) sample as the next tick."""
        t = self._tick * NS_PER_SECOND
        self._tick += 1
        out = {name: ev.value for name, ev in
               self.graph.step(t, {self._expected: float(expected), self._actual: float(actual)})}
        return P2Result(
            ok=not out["violation"],
            diff=float(out["diff"]),
            adjusted=float(out["adjustedSpeed"]),
            changed=bool(out["changed"]),
        )
