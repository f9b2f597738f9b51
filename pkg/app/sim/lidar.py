"""
Simulated 360-beam lidar.

Beam j (1..360) points j degrees counter-clockwise from the heading, so
beam 360 looks straight ahead and beam 90 to the left.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from app.core.models import LIDAR_BEAMS, Pose

from .world import World

if TYPE_CHECKING:
    from .robot import RobotParams

BEAM_OFFSETS = np.deg2rad(np.arange(1, LIDAR_BEAMS + 1) % 360)


@dataclass(frozen=True)
class LidarSample:
    ranges: np.ndarray     # what the sensor reports
    exact: np.ndarray      # ray-cast truth, clipped to the sensor range
    spikes: np.ndarray     # bool mask of beams replaced by a spike


def beam_angles(theta: float) -> np.ndarray:
    return theta + BEAM_OFFSETS


def lidar_sample(world: World, pose: Pose, range_min: float, range_max: float,
                 sigma: float, spike_prob: float, rng: np.random.Generator) -> LidarSample:
    """
    One scan: clipped ray-cast distances plus Gaussian noise, with each beam
    independently replaced by a uniform spike with probability spike_prob.

    The rng is always advanced by the same number of draws, so a scenario's
    random stream does not depend on sigma or spike_prob.
    """
    exact = np.clip(world.ray_cast(pose.x, pose.y, beam_angles(pose.theta)), range_min, range_max)
    noise = rng.normal(0.0, sigma, LIDAR_BEAMS)
    spikes = rng.random(LIDAR_BEAMS) < spike_prob
    spike_values = rng.uniform(range_min, range_max, LIDAR_BEAMS)
    ranges = np.where(spikes, spike_values, exact + noise)
    return LidarSample(np.clip(ranges, range_min, range_max), exact, spikes)


def simulate_lidar(world: World, pose: Pose, params: RobotParams,
                   rng: np.random.Generator) -> np.ndarray:
    """Scan with the sensor settings of a RobotParams."""
    return lidar_sample(world, pose, params.lidar_min, params.lidar_max,
                        params.lidar_sigma, params.spike_prob, rng).ranges
