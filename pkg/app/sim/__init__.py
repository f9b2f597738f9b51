"""Differential-drive robot simulator standing in for the physical twin."""

from .control import TICK_COLUMNS, ControlLoop, TickRecord, ticks_frame, write_ticks
from .lidar import LidarSample, beam_angles, lidar_sample, simulate_lidar
from .mission import (
    DEFAULT_LEVELS,
    ConstantMission,
    Mission,
    ScheduleMission,
    WaypointMission,
    controller_propose,
)
from .robot import (
    COLLISION_MARGIN,
    RobotParams,
    RobotSim,
    SensorReading,
    StepResult,
    effective_speed,
    encoder_speed,
    pose_speed,
    step,
)
from .scenario import Scenario, ScenarioError
from .world import Circle, Rect, TerrainProfile, TerrainSegment, World

__all__ = [
    "TICK_COLUMNS",
    "ControlLoop",
    "TickRecord",
    "ticks_frame",
    "write_ticks",
    "LidarSample",
    "beam_angles",
    "lidar_sample",
    "simulate_lidar",
    "DEFAULT_LEVELS",
    "ConstantMission",
    "Mission",
    "ScheduleMission",
    "WaypointMission",
    "controller_propose",
    "COLLISION_MARGIN",
    "RobotParams",
    "RobotSim",
    "SensorReading",
    "StepResult",
    "effective_speed",
    "encoder_speed",
    "pose_speed",
    "step",
    "Scenario",
    "ScenarioError",
    "Circle",
    "Rect",
    "TerrainProfile",
    "TerrainSegment",
    "World",
]
