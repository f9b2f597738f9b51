"""
Sense -> analyze -> validate -> actuate loop of the simulated robot.

In default mode the robot executes its own proposals. In augmented mode
every proposal is sent to the twin first and only the twin's answer is
executed; no answer means stop.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from collections.abc import Callable
from typing import Optional, Protocol

import pandas as pd

from app import __version__
from app.core.models import META_NAMES, ActuationCommand, RobotStateMsg, VerdictMsg
from app.twin.transport import TransportError

from .mission import Mission, controller_propose
from .robot import RobotSim, SensorReading

logger = logging.getLogger(__name__)

MODES = ("default", "augmented")

TICK_COLUMNS = [
    "t",
    "expected_speed",
    "actual_speed",
    "applied_linear",
    "applied_angular",
    "approved",
    "corrected",
    "collision",
]


class VerdictSource(Protocol):
    def request(self, state: RobotStateMsg) -> Optional[VerdictMsg]:
        ...


@dataclass(frozen=True)
class TickRecord:
    seq: int
    t: float                      # s, start of the tick
    expected_speed: float         # what the controller asked for
    actual_speed: float           # estimator reading over the previous tick
    proposed: ActuationCommand
    applied: ActuationCommand
    approved: bool
    corrected: bool               # executing a P2 correction instead of the proposal
    collision: bool
    encoder_speed: float
    pose_speed: float
    clearance: float              # m, true free distance ahead at sense time
    flagged: bool = False         # verdict timed out or transport failed
    x: float = 0.0

    def row(self) -> dict:
        return {
            "t": self.t,
            "expected_speed": self.expected_speed,
            "actual_speed": self.actual_speed,
            "applied_linear": self.applied.linear,
            "applied_angular": self.applied.angular,
            "approved": self.approved,
            "corrected": self.corrected,
            "collision": self.collision,
        }


def ticks_frame(records: list[TickRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.row() for r in records], columns=TICK_COLUMNS)


def write_ticks(records: list[TickRecord], path: Path) -> Path:
    ticks_frame(records).to_csv(path, index=False)
    return path


class ControlLoop:
    """Drives one RobotSim through a mission, one control period per tick."""

    def __init__(self, robot: RobotSim, mission: Mission, mode: str = "default",
                 link: Optional[VerdictSource] = None,
                 observer: Optional[Callable[[RobotStateMsg], None]] = None):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if mode == "augmented" and link is None:
            raise ValueError("augmented mode needs a twin link")
        self.robot = robot
        self.mission = mission
        self.mode = mode
        self.link = link
        self.observer = observer
        self.seq = 0

    def build_state(self, reading: SensorReading, proposal: ActuationCommand,
                    actual: float) -> RobotStateMsg:
        params = self.robot.params
        meta = {
            "firmware": f"twinmon-sim {__version__}",
            "mode": self.mode,
            "estimator": params.estimator,
            "mission": self.mission.kind,
            "battery": "100",
            "terrain": reading.terrain,
            "reserved": "",
        }
        return RobotStateMsg(
            seq=self.seq,
            t=self.robot.t,
            expected_linear=proposal.linear,
            expected_angular=proposal.angular,
            actual_linear=actual,
            actual_angular=reading.actual_angular,
            expected_speed=abs(proposal.linear),
            actual_speed=actual,
            lidar=reading.scan.tolist(),
            proposed=proposal,
            meta=[meta[name] for name in META_NAMES],
        )

    def _validate(self, state: RobotStateMsg) -> Optional[VerdictMsg]:
        if self.link is None:
            return None
        try:
            return self.link.request(state)
        except TransportError as e:
            logger.warning(f"seq={state.seq}: twin unreachable, stopping: {e}")
            return None

    def control_cycle(self) -> TickRecord:
        robot = self.robot
        t = robot.t
        clearance = robot.clearance()
        reading = robot.sense()
        actual = robot.actual_speed(reading)
        proposal = controller_propose(self.mission, t, robot.pose, robot.params.v_max)

        applied, approved, corrected, flagged = proposal, True, False, False
        if self.mode == "augmented":
            verdict = self._validate(self.build_state(reading, proposal, actual))
            if verdict is None:
                applied, approved, flagged = ActuationCommand.stop(), False, True
            elif verdict.approved:
                applied, approved = proposal, True
            else:
                applied, approved = verdict.action, False
                corrected = verdict.p1_ok and applied.linear != proposal.linear
        elif self.observer is not None:
            self.observer(self.build_state(reading, proposal, actual))

        result = robot.actuate(applied)
        self.seq += 1
        if robot.params.realtime:
            time.sleep(robot.params.control_period)

        return TickRecord(
            seq=self.seq - 1,
            t=t,
            expected_speed=abs(proposal.linear),
            actual_speed=actual,
            proposed=proposal,
            applied=applied,
            approved=approved,
            corrected=corrected,
            collision=result.collision,
            encoder_speed=reading.encoder_speed,
            pose_speed=reading.pose_speed,
            clearance=clearance,
            flagged=flagged,
            x=robot.pose.x,
        )

    def run(self, duration: Optional[float] = None) -> list[TickRecord]:
        total = duration if duration is not None else self.mission.duration
        if total is None:
            raise ValueError("open-ended mission needs an explicit duration")
        ticks = int(round(total / self.robot.params.control_period))
        logger.info(f"Running {ticks} ticks in {self.mode} mode")
        return [self.control_cycle() for _ in range(ticks)]
