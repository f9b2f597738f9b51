"""
Scenario files: world, terrain, robot, mission and monitor constants in YAML.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from app.core.models import MonitorConfig, Pose

from .mission import Mission
from .robot import RobotParams, RobotSim
from .world import TerrainProfile, World

logger = logging.getLogger(__name__)


class ScenarioError(Exception):
    """Scenario file missing, unparsable or inconsistent."""


@dataclass
class Scenario:
    name: str = "scenario"
    description: str = ""
    world: World = field(default_factory=World)
    start: Pose = field(default_factory=Pose)
    terrain: TerrainProfile = field(default_factory=TerrainProfile)
    robot: RobotParams = field(default_factory=RobotParams)
    mission: dict[str, Any] = field(default_factory=lambda: {"kind": "schedule"})
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    seed: int = 0
    duration: Optional[float] = None     # s, defaults to the mission's length

    def build_mission(self) -> Mission:
        return Mission.from_dict(self.mission)

    def build_robot(self, seed: Optional[int] = None) -> RobotSim:
        return RobotSim(self.world, self.terrain, self.robot, self.start,
                        self.seed if seed is None else seed)

    @property
    def run_duration(self) -> float:
        if self.duration is not None:
            return self.duration
        duration = self.build_mission().duration
        if duration is None:
            raise ScenarioError(f"{self.name}: open-ended mission needs a duration")
        return duration

    def validate(self) -> None:
        try:
            self.robot.validate()
            self.monitor.validate()
            self.build_mission()
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"{self.name}: {e}") from e
        if not self.world.is_free(self.start.x, self.start.y):
            raise ScenarioError(f"{self.name}: start pose is not in free space")
        if self.duration is not None and self.duration <= 0:
            raise ScenarioError(f"{self.name}: duration must be > 0")
        if self.duration is None and self.build_mission().duration is None:
            raise ScenarioError(f"{self.name}: open-ended mission needs a duration")

    @classmethod
    def from_dict(cls, data: dict, name: str = "scenario") -> Scenario:
        try:
            world_data = data.get("world") or {}
            scenario = cls(
                name=str(data.get("name", name)),
                description=str(data.get("description", "")),
                world=World.from_dict(world_data),
                start=Pose.from_dict(world_data.get("start") or {}),
                terrain=TerrainProfile.from_list(data.get("terrain")),
                robot=RobotParams.from_dict(data.get("robot") or {}),
                mission=dict(data.get("mission") or {"kind": "schedule"}),
                monitor=MonitorConfig.from_dict(data.get("monitor") or {}),
                seed=int(data.get("seed", 0)),
                duration=None if data.get("duration") is None else float(data["duration"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ScenarioError(f"{name}: {e}") from e
        scenario.validate()
        return scenario

    @classmethod
    def load(cls, path: Path) -> Scenario:
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text())
        except OSError as e:
            raise ScenarioError(f"cannot read scenario {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ScenarioError(f"{path}: invalid YAML: {e}") from e
        if not isinstance(data, dict):
            raise ScenarioError(f"{path}: scenario must be a mapping")
        scenario = cls.from_dict(data, name=path.stem)
        logger.debug(f"Loaded scenario {scenario.name} from {path}")
        return scenario
