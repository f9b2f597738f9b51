"""
Safety and performance properties of the robot.

P1  braking distance must fit inside the free space ahead
P2  actual speed may deviate from expected speed by at most delta
P3  a lidar beam that disagrees with both neighbours is a faulty reading

Scans are numpy arrays of 360 ranges; array index i holds beam i+1, beam j
pointing j degrees counter-clockwise from the heading (beam 360 is straight
ahead).
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from app.core.models import LIDAR_BEAMS, MonitorConfig


class MonitorError(Exception):
    """Base exception for monitor evaluation."""


class MalformedStateError(MonitorError):
    """State cannot be evaluated (wrong scan length, non-finite values)."""


class UnusableScanError(MonitorError):
    """Every beam of a scan is faulty."""


_BEAMS = np.arange(1, LIDAR_BEAMS + 1)
# angular distance of each beam from the heading, degrees
_OFFSET_FROM_HEADING = np.minimum(_BEAMS % 360, 360 - _BEAMS % 360)


@dataclass(frozen=True)
class SpeedPair:
    """Scalar expected and actual speed, m/s."""
    expected: float
    actual: float

    def __post_init__(self) -> None:
        if self.expected < 0 or self.actual < 0:
            raise MalformedStateError(f"speeds must be >= 0, got {self}")


def as_scan(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Validate and convert lidar ranges to a float array."""
    scan = np.asarray(values, dtype=float)
    if scan.shape != (LIDAR_BEAMS,):
        raise MalformedStateError(f"scan must have {LIDAR_BEAMS} beams, got shape {scan.shape}")
    if not np.all(np.isfinite(scan)):
        raise MalformedStateError("scan holds non-finite ranges")
    return scan


def scalar_speed(linear: float, angular: float, cfg: MonitorConfig) -> float:
    """
    Scalar speed of a (linear, angular) pair.

    `linear` combiner: |v|. `outer_wheel`: speed of the faster wheel,
    max(|v - w*b/2|, |v + w*b/2|) with b the wheel separation.
    """
    if cfg.speed_combiner == "outer_wheel":
        half = angular * cfg.wheel_separation / 2.0
        return max(abs(linear - half), abs(linear + half))
    return abs(linear)


def ldist(scan: np.ndarray, window: float = 30.0) -> float:
    """Nearest range within `window` degrees either side of the heading."""
    return float(np.min(scan[_OFFSET_FROM_HEADING <= window]))


def braking_distance(actual: float, cfg: MonitorConfig) -> float:
    """Distance covered during the reaction latency plus the stop at decel_max."""
    return actual * cfg.react_latency + actual * actual / (2.0 * cfg.decel_max)


def check_p1(scan: np.ndarray, actual: float, cfg: MonitorConfig) -> bool:
    return braking_distance(actual, cfg) <= ldist(scan, cfg.heading_window)


def check_p2(sp: SpeedPair, cfg: MonitorConfig) -> tuple[bool, float]:
    """Returns (ok, expected - actual)."""
    diff = sp.expected - sp.actual
    if cfg.p2_one_sided:
        return diff <= cfg.delta, diff
    return abs(diff) <= cfg.delta, diff


def optimize_actual_speed(expected: float, actual: float, cfg: MonitorConfig) -> tuple[float, bool]:
    """
    Corrected expected speed: expected + gain * (expected - actual), clamped to
    [0, v_max]. Returns (adjusted, adjusted != expected).
    """
    diff = expected - actual
    raw = expected + cfg.gain * diff
    adjusted = min(max(raw, 0.0), cfg.v_max)
    return adjusted, adjusted != expected


def check_p3(scan: np.ndarray, cfg: MonitorConfig) -> frozenset[int]:
    """1-based indices of beams jumping more than gamma from both neighbours."""
    previous = np.roll(scan, 1)
    following = np.roll(scan, -1)
    faulty = (np.abs(scan - previous) > cfg.gamma) & (np.abs(scan - following) > cfg.gamma)
    return frozenset(int(i) + 1 for i in np.flatnonzero(faulty))


def sanitize_scan(scan: np.ndarray, faulty: Iterable[int]) -> np.ndarray:
    """
    Replace each faulty beam by the mean of the nearest non-faulty beam on
    either side, searching past runs of faulty beams and wrapping 360 -> 1.
    """
    bad = set(faulty)
    cleaned = np.array(scan, dtype=float, copy=True)
    if not bad:
        return cleaned
    if len(bad) >= LIDAR_BEAMS:
        raise UnusableScanError("every beam is faulty")
    for beam in sorted(bad):
        below = beam
        while below in bad:
            below = (below - 2) % LIDAR_BEAMS + 1
        above = beam
        while above in bad:
            above = above % LIDAR_BEAMS + 1
        cleaned[beam - 1] = (scan[below - 1] + scan[above - 1]) / 2.0
    return cleaned

