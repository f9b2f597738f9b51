"""
Differential-drive robot: unicycle kinematics over traction-varying terrain.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np

from app.core.models import V_MAX, ActuationCommand, Pose, normalize_angle

from .lidar import simulate_lidar
from .world import TerrainProfile, TerrainSegment, World

logger = logging.getLogger(__name__)

# closest the robot centre gets to an obstacle, m
COLLISION_MARGIN = 0.01

ESTIMATORS = ("pose", "encoder")


@dataclass
class RobotParams:
    wheel_separation: float = 0.160    # m
    v_max: float = V_MAX               # m/s
    lidar_min: float = 0.12            # m
    lidar_max: float = 3.5             # m
    lidar_sigma: float = 0.01          # m
    spike_prob: float = 0.0            # per beam per scan
    control_period: float = 0.1        # s
    estimator: str = "pose"            # actual-speed source: pose | encoder
    realtime: bool = False             # sleep one period per tick

    def validate(self) -> None:
        if self.v_max <= 0:
            raise ValueError("v_max must be > 0")
        if not 0.0 <= self.spike_prob < 1.0:
            raise ValueError("spike_prob must be in [0, 1)")
        if self.control_period <= 0:
            raise ValueError("control_period must be > 0")
        if not 0.0 < self.lidar_min < self.lidar_max:
            raise ValueError("lidar range must satisfy 0 < lidar_min < lidar_max")
        if self.lidar_sigma < 0:
            raise ValueError("lidar_sigma must be >= 0")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> RobotParams:
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


class StepResult(NamedTuple):
    pose: Pose
    actual_linear: float    # m/s actually travelled
    collision: bool


def effective_speed(segment: TerrainSegment, linear: float, u: float = 0.0) -> float:
    """Commanded speed after breakaway and traction; u in [0, 1) scales bumpiness."""
    if abs(linear) < segment.breakaway:
        return 0.0
    return linear * segment.traction * (1.0 - segment.bumpiness * u)


def step(world: World, terrain: TerrainProfile, pose: Pose, command: ActuationCommand,
         dt: float, rng: Optional[np.random.Generator] = None) -> StepResult:
    """
    Advance the robot by one period.

    Motion along the heading stops COLLISION_MARGIN short of the first
    obstacle or bound; the collision flag is set when that clamps the move.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    u = float(rng.random()) if rng is not None else 0.0
    v_eff = effective_speed(terrain.segment_at(pose.x), command.linear, u)

    travel = v_eff * dt
    heading = pose.theta if travel >= 0 else pose.theta + math.pi
    allowed = max(0.0, world.free_distance(pose.x, pose.y, heading) - COLLISION_MARGIN)
    collision = abs(travel) > allowed
    if collision:
        travel = math.copysign(allowed, travel)
        v_eff = travel / dt

    new_pose = Pose(
        pose.x + travel * math.cos(pose.theta),
        pose.y + travel * math.sin(pose.theta),
        pose.theta + command.angular * dt,
    )
    return StepResult(new_pose, v_eff, collision)


def encoder_speed(commands: Sequence[ActuationCommand]) -> float:
    """Wheel-odometry speed: whatever the wheels were last told to do."""
    if not commands:
        return 0.0
    return abs(commands[-1].linear)


def pose_speed(samples: Sequence[tuple[float, Pose]]) -> float:
    """Displacement speed between the last two (t, pose) samples."""
    if len(samples) < 2:
        return 0.0
    (t1, p1), (t2, p2) = samples[-2], samples[-1]
    if t2 <= t1:
        raise ValueError(f"pose samples must be increasing in time ({t1} -> {t2})")
    return p1.distance_to(p2) / (t2 - t1)


@dataclass(frozen=True)
class SensorReading:
    scan: np.ndarray
    encoder_speed: float
    pose_speed: float
    actual_angular: float
    terrain: str


class RobotSim:
    """
    The simulated physical robot.

    Owns the pose, the virtual clock and two random streams (lidar and
    terrain) spawned from one seed.
    """

    def __init__(self, world: World, terrain: TerrainProfile, params: RobotParams,
                 start: Pose, seed: int = 0):
        params.validate()
        if not world.is_free(start.x, start.y):
            raise ValueError(f"start pose {start} is not in free space")
        self.world = world
        self.terrain = terrain
        self.params = params
        self.pose = start
        self.tick = 0
        lidar_seq, terrain_seq = np.random.SeedSequence(seed).spawn(2)
        self.lidar_rng = np.random.default_rng(lidar_seq)
        self.terrain_rng = np.random.default_rng(terrain_seq)
        self._commands: deque[ActuationCommand] = deque(maxlen=1)
        self._poses: deque[tuple[float, Pose]] = deque([(0.0, start)], maxlen=2)
        self.collisions = 0

    @property
    def t(self) -> float:
        return self.tick * self.params.control_period

    def sense(self) -> SensorReading:
        scan = simulate_lidar(self.world, self.pose, self.params, self.lidar_rng)
        angular = 0.0
        if len(self._poses) == 2:
            (t1, p1), (t2, p2) = self._poses
            angular = normalize_angle(p2.theta - p1.theta) / (t2 - t1)
        return SensorReading(
            scan=scan,
            encoder_speed=encoder_speed(self._commands),
            pose_speed=pose_speed(self._poses),
            actual_angular=angular,
            terrain=self.terrain.segment_at(self.pose.x).name,
        )

    def actual_speed(self, reading: SensorReading) -> float:
        if self.params.estimator == "encoder":
            return reading.encoder_speed
        return reading.pose_speed

    def clearance(self) -> float:
        """True free distance straight ahead."""
        return self.world.free_distance(self.pose.x, self.pose.y, self.pose.theta)

    def actuate(self, command: ActuationCommand) -> StepResult:
        result = step(self.world, self.terrain, self.pose, command,
                      self.params.control_period, self.terrain_rng)
        self.pose = result.pose
        self.tick += 1
        self._commands.append(command)
        self._poses.append((self.t, result.pose))
        if result.collision:
            self.collisions += 1
            logger.debug(f"Collision at t={self.t:.2f} pose=({self.pose.x:.3f}, {self.pose.y:.3f})")
        return result
