"""
Missions: what the robot's own controller proposes at each tick.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

from app.core.models import V_MAX, ActuationCommand, Pose, normalize_angle

DEFAULT_LEVELS = (0.015, 0.03, 0.05, 0.075, 0.1)


class Mission(ABC):
    kind: str = ""

    @abstractmethod
    def propose(self, t: float, pose: Pose) -> ActuationCommand:
        ...

    @property
    def duration(self) -> Optional[float]:
        """Seconds until the mission is complete, None if open-ended."""
        return None

    def reset(self) -> None:
        pass

    @abstractmethod
    def to_dict(self) -> dict:
        ...

    @staticmethod
    def from_dict(data: dict) -> Mission:
        kind = data.get("kind", "schedule")
        if kind == "schedule":
            return ScheduleMission(
                levels=tuple(float(v) for v in data.get("levels", DEFAULT_LEVELS)),
                dwell=float(data.get("dwell", 10.0)),
                cycles=int(data.get("cycles", 1)),
            )
        if kind == "constant":
            duration = data.get("duration")
            return ConstantMission(
                linear=float(data.get("linear", 0.1)),
                angular=float(data.get("angular", 0.0)),
                run_for=None if duration is None else float(duration),
            )
        if kind == "waypoint":
            return WaypointMission(
                waypoints=[(float(x), float(y)) for x, y in data.get("waypoints", [])],
                cruise=float(data.get("cruise", 0.1)),
                tolerance=float(data.get("tolerance", 0.05)),
                heading_gain=float(data.get("heading_gain", 1.5)),
            )
        raise ValueError(f"unknown mission kind {kind!r}")


@dataclass
class ScheduleMission(Mission):
    """Piecewise-constant speed levels, each held for `dwell` seconds."""
    levels: tuple[float, ...] = DEFAULT_LEVELS
    dwell: float = 10.0
    cycles: int = 1
    kind: str = field(default="schedule", init=False)

    def __post_init__(self) -> None:
        if not self.levels:
            raise ValueError("schedule needs at least one level")
        if self.dwell <= 0 or self.cycles < 1:
            raise ValueError("schedule needs dwell > 0 and cycles >= 1")

    @property
    def duration(self) -> float:
        return len(self.levels) * self.dwell * self.cycles

    def propose(self, t: float, pose: Pose) -> ActuationCommand:
        # tolerance keeps tick * period from landing just below a boundary
        slot = int(t / self.dwell + 1e-9)
        if t < 0 or slot >= len(self.levels) * self.cycles:
            return ActuationCommand.stop()
        return ActuationCommand(self.levels[slot % len(self.levels)], 0.0)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "levels": list(self.levels),
                "dwell": self.dwell, "cycles": self.cycles}


@dataclass
class ConstantMission(Mission):
    linear: float = 0.1
    angular: float = 0.0
    run_for: Optional[float] = None
    kind: str = field(default="constant", init=False)

    @property
    def duration(self) -> Optional[float]:
        return self.run_for

    def propose(self, t: float, pose: Pose) -> ActuationCommand:
        if self.run_for is not None and t >= self.run_for:
            return ActuationCommand.stop()
        return ActuationCommand(self.linear, self.angular)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "linear": self.linear, "angular": self.angular,
                "duration": self.run_for}


@dataclass
class WaypointMission(Mission):
    """Drive through waypoints with a proportional heading controller."""
    waypoints: list[tuple[float, float]] = field(default_factory=list)
    cruise: float = 0.1
    tolerance: float = 0.05
    heading_gain: float = 1.5
    kind: str = field(default="waypoint", init=False)
    _index: int = field(default=0, init=False, repr=False)

    def reset(self) -> None:
        self._index = 0

    @property
    def done(self) -> bool:
        return self._index >= len(self.waypoints)

    def propose(self, t: float, pose: Pose) -> ActuationCommand:
        while not self.done:
            gx, gy = self.waypoints[self._index]
            if math.hypot(gx - pose.x, gy - pose.y) > self.tolerance:
                break
            self._index += 1
        if self.done:
            return ActuationCommand.stop()
        gx, gy = self.waypoints[self._index]
        error = normalize_angle(math.atan2(gy - pose.y, gx - pose.x) - pose.theta)
        linear = self.cruise * max(0.0, math.cos(error))
        return ActuationCommand(linear, self.heading_gain * error)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "waypoints": [list(w) for w in self.waypoints],
                "cruise": self.cruise, "tolerance": self.tolerance,
                "heading_gain": self.heading_gain}


def controller_propose(mission: Mission, t: float, pose: Optional[Pose] = None,
                       v_max: float = V_MAX) -> ActuationCommand:
    """The mission's command at time t, capped at v_max."""
    return mission.propose(t, pose or Pose()).capped(v_max)
