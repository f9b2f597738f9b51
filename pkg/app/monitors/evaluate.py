"""
Verdicts: P3 -> sanitize -> P1 -> P2 on one robot state.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from app.core.models import ActuationCommand, MonitorConfig, RobotStateMsg, VerdictMsg

from .properties import (
    SpeedPair,
    UnusableScanError,
    as_scan,
    check_p1,
    check_p2,
    check_p3,
    optimize_actual_speed,
    sanitize_scan,
    scalar_speed,
)
from .stream_monitor import P2Result, StreamP2Monitor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Verdict:
    p1_ok: bool
    p2_ok: bool
    faulty_beams: frozenset[int]
    approved: bool
    action: ActuationCommand
    diff: float                 # expected - actual, m/s
    corrected: bool = False     # P2 correction applied and not overridden by a stop

    def to_message(self, seq: int, t: float) -> VerdictMsg:
        return VerdictMsg(
            seq=seq,
            t=t,
            p1_ok=self.p1_ok,
            p2_ok=self.p2_ok,
            faulty_beams=sorted(self.faulty_beams),
            approved=self.approved,
            action=self.action,
        )


def direct_p2(cfg: MonitorConfig) -> Callable[[float, float], P2Result]:
    def run(expected: float, actual: float) -> P2Result:
        ok, diff = check_p2(SpeedPair(expected, actual), cfg)
        adjusted, changed = optimize_actual_speed(expected, actual, cfg)
        return P2Result(ok, diff, adjusted, changed)
    return run


def _evaluate(state: RobotStateMsg, cfg: MonitorConfig,
              p2: Callable[[float, float], P2Result]) -> Verdict:
    scan = as_scan(state.lidar)
    SpeedPair(state.expected_speed, state.actual_speed)

    faulty = check_p3(scan, cfg)
    try:
        clean = sanitize_scan(scan, faulty)
        proposed_speed = scalar_speed(state.proposed.linear, state.proposed.angular, cfg)
        p1_ok = check_p1(clean, max(state.actual_speed, proposed_speed), cfg)
    except UnusableScanError:
        logger.warning(f"seq={state.seq}: every lidar beam is faulty, stopping")
        p1_ok = False

    p2_result = p2(state.expected_speed, state.actual_speed)

    action = state.proposed
    corrected = False
    if not p2_result.ok:
        action = ActuationCommand(p2_result.adjusted, state.proposed.angular)
        corrected = action != state.proposed
    if not p1_ok:
        action = ActuationCommand.stop()
        corrected = False

    return Verdict(
        p1_ok=p1_ok,
        p2_ok=p2_result.ok,
        faulty_beams=faulty,
        approved=p1_ok and p2_result.ok,
        action=action,
        diff=p2_result.diff,
        corrected=corrected,
    )


def evaluate(state: RobotStateMsg, cfg: MonitorConfig) -> Verdict:
    """
    Run all monitors on one state.

    P1 checks the faster of the current actual speed and the speed the
    proposal would produce. A P2 failure replaces the linear speed by the
    corrected one; a P1 failure stops the robot and wins over P2.

    Raises:
        MalformedStateError: wrong scan length, non-finite ranges or negative speeds
    """
    return _evaluate(state, cfg, direct_p2(cfg))


class MonitorSuite:
    """
    Stateful evaluator used by the twin.

    backend "direct" calls the property functions; "stream" runs P2 through
    the DSL spec.
    """

    def __init__(self, cfg: MonitorConfig, backend: str = "direct",
                 spec_path: Optional[Path] = None):
        self.cfg = cfg
        self.backend = backend
        if backend == "stream":
            self._stream: Optional[StreamP2Monitor] = StreamP2Monitor(cfg, spec_path)
            self._p2 = self._stream.evaluate
        elif backend == "direct":
            self._stream = None
            self._p2 = direct_p2(cfg)
        else:
            raise ValueError(f"unknown monitor backend {backend!r}")

    def evaluate(self, state: RobotStateMsg) -> Verdict:
        return _evaluate(state, self.cfg, self._p2)

    def reset(self) -> None:
        if self._stream is not None:
            self._stream.reset()
