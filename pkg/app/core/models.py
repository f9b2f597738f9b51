"""
Core data models for TwinMon.

All times are seconds (float) and all speeds m/s unless a field says otherwise.
Wire payloads use the camelCase field names of the robot <-> twin protocol.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

LIDAR_BEAMS = 360
META_FIELDS = 7
META_NAMES = ("firmware", "mode", "estimator", "mission", "battery", "terrain", "reserved")

# Actuation cap of the modeled robot (m/s)
V_MAX = 0.22


class DecodeError(ValueError):
    """Payload could not be decoded into a protocol message."""


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class ActuationCommand:
    """Velocity command for the differential drive."""
    linear: float = 0.0      # m/s
    angular: float = 0.0     # rad/s

    @classmethod
    def stop(cls) -> ActuationCommand:
        return cls(0.0, 0.0)

    def capped(self, v_max: float = V_MAX) -> ActuationCommand:
        """Clamp |linear| to v_max, keeping the sign."""
        return ActuationCommand(max(-v_max, min(v_max, self.linear)), self.angular)

    def to_dict(self) -> dict:
        return {"linear": float(self.linear), "angular": float(self.angular)}

    @classmethod
    def from_dict(cls, data: dict) -> ActuationCommand:
        return cls(linear=float(data["linear"]), angular=float(data["angular"]))


@dataclass(frozen=True)
class Pose:
    """Planar robot pose; theta is kept normalized."""
    x: float = 0.0           # m
    y: float = 0.0           # m
    theta: float = 0.0       # rad, (-pi, pi]

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def distance_to(self, other: Pose) -> float:
        return math.hypot(other.x - self.x, other.y - self.y)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "theta": self.theta}

    @classmethod
    def from_dict(cls, data: dict) -> Pose:
        return cls(float(data.get("x", 0.0)), float(data.get("y", 0.0)),
                   float(data.get("theta", 0.0)))


@dataclass
class MonitorConfig:
    """Constants of the P1/P2/P3 monitors."""
    # P2 speed tolerance
    delta: float = 0.05                 # m/s
    p2_one_sided: bool = False          # literal (expected - actual) <= delta form

    # P3 adjacency jump
    gamma: float = 0.5                  # m

    # P1 braking model
    decel_max: float = 0.5              # m/s^2
    react_latency: float = 0.2          # s
    heading_window: float = 30.0        # degrees, half-width of the forward cone

    # Correction law
    gain: float = 0.5
    v_max: float = V_MAX                # m/s

    # Scalar speed from (linear, angular)
    speed_combiner: str = "linear"      # linear | outer_wheel
    wheel_separation: float = 0.160     # m

    def validate(self) -> None:
        """Raise ValueError for out-of-range constants."""
        for name in ("delta", "gamma", "decel_max", "react_latency", "gain", "v_max",
                     "wheel_separation"):
            if not getattr(self, name) > 0:
                raise ValueError(f"monitor.{name} must be > 0, got {getattr(self, name)!r}")
        if not 0 < self.heading_window <= 180:
            raise ValueError(
                f"monitor.heading_window must be in (0, 180], got {self.heading_window!r}")
        if self.speed_combiner not in ("linear", "outer_wheel"):
            raise ValueError(f"unknown speed_combiner {self.speed_combiner!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> MonitorConfig:
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


@dataclass
class TopicConfig:
    """Where robot state and verdicts travel."""
    broker_url: str = "memory://"
    state_topic: str = "tessla"
    action_topic: str = "action"
    payload_format: str = "json"
    qos: int = 1

    def validate(self) -> None:
        if not self.state_topic or not self.action_topic:
            raise ValueError("topics must be non-empty")
        if self.state_topic == self.action_topic:
            raise ValueError(f"state and action topics must differ, both are {self.state_topic!r}")
        if self.payload_format != "json":
            raise ValueError(f"unsupported payload format {self.payload_format!r}")
        if self.qos not in (0, 1):
            raise ValueError(f"qos must be 0 or 1, got {self.qos!r}")


def _as_float(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DecodeError(f"{where} must be a number, got {value!r}")
    return float(value)


def _number(data: dict, key: str) -> float:
    if key not in data:
        raise DecodeError(f"missing field {key!r}")
    return _as_float(data[key], f"field {key!r}")


def _command(data: dict, key: str) -> ActuationCommand:
    raw = data.get(key)
    if not isinstance(raw, dict):
        raise DecodeError(f"field {key!r} must be an object")
    return ActuationCommand(_number(raw, "linear"), _number(raw, "angular"))


def _load_json(payload: bytes | str) -> dict:
    if isinstance(payload, bytes):
        try:
            payload = payload.decode("utf-8")
        except UnicodeDecodeError as e:
            raise DecodeError(f"payload is not UTF-8: {e}") from e
    try:
        data = json.loads(payload)
    except json.JSONDecodeError as e:
        raise DecodeError(f"payload is not JSON: {e}") from e
    if not isinstance(data, dict):
        raise DecodeError("payload must be a JSON object")
    return data


def _dump_json(data: dict) -> str:
    return json.dumps(data, separators=(",", ":"), allow_nan=True)


@dataclass
class RobotStateMsg:
    """
    One control tick of robot state, as published by the robot.

    expected_* is what the wheels were told, actual_* what the robot did.
    """
    seq: int
    t: float                                   # s
    expected_linear: float = 0.0
    expected_angular: float = 0.0
    actual_linear: float = 0.0
    actual_angular: float = 0.0
    expected_speed: float = 0.0                # scalar m/s
    actual_speed: float = 0.0                  # scalar m/s
    lidar: list[float] = field(default_factory=lambda: [3.5] * LIDAR_BEAMS)
    proposed: ActuationCommand = field(default_factory=ActuationCommand)
    meta: list[str] = field(default_factory=lambda: [""] * META_FIELDS)

    def validate(self) -> None:
        """Raise DecodeError when the message breaks protocol invariants."""
        if len(self.lidar) != LIDAR_BEAMS:
            raise DecodeError(f"lidar must have {LIDAR_BEAMS} values, got {len(self.lidar)}")
        if len(self.meta) != META_FIELDS:
            raise DecodeError(f"meta must have {META_FIELDS} values, got {len(self.meta)}")
        if self.seq < 0:
            raise DecodeError(f"seq must be >= 0, got {self.seq}")
        scalars = {
            "t": self.t,
            "expectedLinear": self.expected_linear,
            "expectedAngular": self.expected_angular,
            "actualLinear": self.actual_linear,
            "actualAngular": self.actual_angular,
            "expectedSpeed": self.expected_speed,
            "actualSpeed": self.actual_speed,
            "proposed.linear": self.proposed.linear,
            "proposed.angular": self.proposed.angular,
        }
        for name, value in scalars.items():
            if not math.isfinite(value):
                raise DecodeError(f"field {name!r} must be finite, got {value!r}")

    def to_payload(self) -> dict:
        return {
            "seq": self.seq,
            "t": float(self.t),
            "expectedLinear": float(self.expected_linear),
            "expectedAngular": float(self.expected_angular),
            "actualLinear": float(self.actual_linear),
            "actualAngular": float(self.actual_angular),
            "expectedSpeed": float(self.expected_speed),
            "actualSpeed": float(self.actual_speed),
            "lidar": [float(v) for v in self.lidar],
            "proposed": self.proposed.to_dict(),
            "meta": [str(m) for m in self.meta],
        }

    @classmethod
    def from_payload(cls, data: dict) -> RobotStateMsg:
        seq = data.get("seq")
        if isinstance(seq, bool) or not isinstance(seq, int):
            raise DecodeError(f"seq must be an integer, got {seq!r}")
        lidar = data.get("lidar")
        if not isinstance(lidar, list):
            raise DecodeError("lidar must be a list")
        meta = data.get("meta")
        if not isinstance(meta, list):
            raise DecodeError("meta must be a list")
        msg = cls(
            seq=seq,
            t=_number(data, "t"),
            expected_linear=_number(data, "expectedLinear"),
            expected_angular=_number(data, "expectedAngular"),
            actual_linear=_number(data, "actualLinear"),
            actual_angular=_number(data, "actualAngular"),
            expected_speed=_number(data, "expectedSpeed"),
            actual_speed=_number(data, "actualSpeed"),
            lidar=[_as_float(v, f"lidar[{i}]") for i, v in enumerate(lidar)],
            proposed=_command(data, "proposed"),
            meta=[str(m) for m in meta],
        )
        msg.validate()
        return msg

    def to_json(self) -> str:
        return _dump_json(self.to_payload())

    @classmethod
    def from_json(cls, payload: bytes | str) -> RobotStateMsg:
        return cls.from_payload(_load_json(payload))


@dataclass
class VerdictMsg:
    """The twin's answer to one RobotStateMsg, matched by seq."""
    seq: int
    t: float
    p1_ok: bool = True
    p2_ok: bool = True
    faulty_beams: list[int] = field(default_factory=list)
    approved: bool = True
    action: ActuationCommand = field(default_factory=ActuationCommand)

    def to_payload(self) -> dict:
        return {
            "seq": self.seq,
            "t": float(self.t),
            "p1Ok": bool(self.p1_ok),
            "p2Ok": bool(self.p2_ok),
            "faultyBeams": sorted(int(b) for b in self.faulty_beams),
            "approved": bool(self.approved),
            "action": self.action.to_dict(),
        }

    @classmethod
    def from_payload(cls, data: dict) -> VerdictMsg:
        seq = data.get("seq")
        if isinstance(seq, bool) or not isinstance(seq, int):
            raise DecodeError(f"seq must be an integer, got {seq!r}")
        flags: dict[str, bool] = {}
        for key in ("p1Ok", "p2Ok", "approved"):
            value = data.get(key)
            if not isinstance(value, bool):
                raise DecodeError(f"field {key!r} must be a boolean, got {value!r}")
            flags[key] = value
        beams = data.get("faultyBeams", [])
        if not isinstance(beams, list) or not all(isinstance(b, int) for b in beams):
            raise DecodeError("faultyBeams must be a list of integers")
        return cls(
            seq=seq,
            t=_number(data, "t"),
            p1_ok=flags["p1Ok"],
            p2_ok=flags["p2Ok"],
            faulty_beams=list(beams),
            approved=flags["approved"],
            action=_command(data, "action"),
        )

    def to_json(self) -> str:
        return _dump_json(self.to_payload())

    @classmethod
    def from_json(cls, payload: bytes | str) -> VerdictMsg:
        return cls.from_payload(_load_json(payload))


def state_from_record(record: dict[str, Any]) -> Optional[RobotStateMsg]:
    """Rebuild a state message from a twin log record, None for other kinds."""
    if record.get("kind") != "state":
        return None
    return RobotStateMsg.from_payload(record["payload"])
