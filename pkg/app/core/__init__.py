"""Shared domain models and framework settings."""

from .models import (
    LIDAR_BEAMS,
    META_FIELDS,
    V_MAX,
    ActuationCommand,
    DecodeError,
    MonitorConfig,
    Pose,
    RobotStateMsg,
    TopicConfig,
    VerdictMsg,
    normalize_angle,
)
from .settings import DEFAULT_PRESETS, Preset, Settings

__all__ = [
    "LIDAR_BEAMS",
    "META_FIELDS",
    "V_MAX",
    "ActuationCommand",
    "DecodeError",
    "MonitorConfig",
    "Pose",
    "RobotStateMsg",
    "TopicConfig",
    "VerdictMsg",
    "normalize_angle",
    "DEFAULT_PRESETS",
    "Preset",
    "Settings",
]
