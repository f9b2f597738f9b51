"""Runtime monitors for braking distance, speed tolerance and lidar consistency."""

from .evaluate import MonitorSuite, Verdict, evaluate
from .properties import (
    MalformedStateError,
    MonitorError,
    SpeedPair,
    UnusableScanError,
    as_scan,
    braking_distance,
    check_p1,
    check_p2,
    check_p3,
    ldist,
    optimize_actual_speed,
    sanitize_scan,
    scalar_speed,
)
from .stream_monitor import P2Result, StreamP2Monitor, default_spec_path

__all__ = [
    "MonitorSuite",
    "Verdict",
    "evaluate",
    "MalformedStateError",
    "MonitorError",
    "SpeedPair",
    "UnusableScanError",
    "as_scan",
    "braking_distance",
    "check_p1",
    "check_p2",
    "check_p3",
    "ldist",
    "optimize_actual_speed",
    "sanitize_scan",
    "scalar_speed",
    "P2Result",
    "StreamP2Monitor",
    "default_spec_path",
]
