"""
2-D world geometry and terrain.

Obstacles are axis-aligned rectangles and circles inside a rectangular
bound. Ray casting is vectorized over beam angles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

_PARALLEL_EPS = 1e-12


@dataclass(frozen=True)
class Rect:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError(f"degenerate rectangle {self}")

    def contains(self, x: float, y: float, margin: float = 0.0) -> bool:
        return (self.x_min - margin <= x <= self.x_max + margin
                and self.y_min - margin <= y <= self.y_max + margin)

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "y_min": self.y_min,
                "x_max": self.x_max, "y_max": self.y_max}

    @classmethod
    def from_dict(cls, data: dict) -> Rect:
        return cls(float(data["x_min"]), float(data["y_min"]),
                   float(data["x_max"]), float(data["y_max"]))


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float

    def __post_init__(self) -> None:
        if self.r <= 0:
            raise ValueError(f"circle radius must be > 0, got {self.r}")

    def contains(self, x: float, y: float, margin: float = 0.0) -> bool:
        return math.hypot(x - self.cx, y - self.cy) <= self.r + margin

    def to_dict(self) -> dict:
        return {"cx": self.cx, "cy": self.cy, "r": self.r}

    @classmethod
    def from_dict(cls, data: dict) -> Circle:
        return cls(float(data["cx"]), float(data["cy"]), float(data["r"]))


def _slab(origin: float, d: np.ndarray, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Entry and exit ray parameters for one axis slab [lo, hi]."""
    parallel = np.abs(d) < _PARALLEL_EPS
    safe = np.where(parallel, 1.0, d)
    t1 = (lo - origin) / safe
    t2 = (hi - origin) / safe
    inside = lo <= origin <= hi
    t_enter = np.where(parallel, -np.inf if inside else np.inf, np.minimum(t1, t2))
    t_exit = np.where(parallel, np.inf if inside else -np.inf, np.maximum(t1, t2))
    return t_enter, t_exit


def _ray_rect(x: float, y: float, dx: np.ndarray, dy: np.ndarray, rect: Rect) -> np.ndarray:
    ex, fx = _slab(x, dx, rect.x_min, rect.x_max)
    ey, fy = _slab(y, dy, rect.y_min, rect.y_max)
    t_near = np.maximum(ex, ey)
    t_far = np.minimum(fx, fy)
    hit = (t_near <= t_far) & (t_far >= 0.0)
    return np.where(hit, np.maximum(t_near, 0.0), np.inf)


def _ray_circle(x: float, y: float, dx: np.ndarray, dy: np.ndarray, c: Circle) -> np.ndarray:
    ox, oy = x - c.cx, y - c.cy
    b = dx * ox + dy * oy
    cc = ox * ox + oy * oy - c.r * c.r
    disc = b * b - cc
    root = np.sqrt(np.maximum(disc, 0.0))
    t_near = -b - root
    t_far = -b + root
    hit = (disc >= 0.0) & (t_far >= 0.0)
    return np.where(hit, np.maximum(t_near, 0.0), np.inf)


def _ray_exit(x: float, y: float, dx: np.ndarray, dy: np.ndarray, bounds: Rect) -> np.ndarray:
    """Distance from an inside point to the bounds along each ray."""
    _, fx = _slab(x, dx, bounds.x_min, bounds.x_max)
    _, fy = _slab(y, dy, bounds.y_min, bounds.y_max)
    return np.maximum(np.minimum(fx, fy), 0.0)


@dataclass
class World:
    """Bounded plane with rectangle and circle obstacles."""
    bounds: Rect = field(default_factory=lambda: Rect(-10.0, -10.0, 10.0, 10.0))
    rects: list[Rect] = field(default_factory=list)
    circles: list[Circle] = field(default_factory=list)

    def is_free(self, x: float, y: float, margin: float = 0.0) -> bool:
        """Point lies inside the bounds and outside every obstacle."""
        if not (self.bounds.x_min < x < self.bounds.x_max
                and self.bounds.y_min < y < self.bounds.y_max):
            return False
        if any(r.contains(x, y, margin) for r in self.rects):
            return False
        return not any(c.contains(x, y, margin) for c in self.circles)

    def ray_cast(self, x: float, y: float, angles: np.ndarray) -> np.ndarray:
        """Exact distance to the nearest obstacle or bound along each angle."""
        angles = np.asarray(angles, dtype=float)
        dx, dy = np.cos(angles), np.sin(angles)
        dist = _ray_exit(x, y, dx, dy, self.bounds)
        for rect in self.rects:
            dist = np.minimum(dist, _ray_rect(x, y, dx, dy, rect))
        for circle in self.circles:
            dist = np.minimum(dist, _ray_circle(x, y, dx, dy, circle))
        return dist

    def free_distance(self, x: float, y: float, heading: float) -> float:
        return float(self.ray_cast(x, y, np.array([heading]))[0])

    def to_dict(self) -> dict:
        return {
            "bounds": self.bounds.to_dict(),
            "rects": [r.to_dict() for r in self.rects],
            "circles": [c.to_dict() for c in self.circles],
        }

    @classmethod
    def from_dict(cls, data: dict) -> World:
        world = cls()
        if "bounds" in data:
            world.bounds = Rect.from_dict(data["bounds"])
        world.rects = [Rect.from_dict(r) for r in data.get("rects", [])]
        world.circles = [Circle.from_dict(c) for c in data.get("circles", [])]
        return world


@dataclass(frozen=True)
class TerrainSegment:
    """A strip of floor between x_start and x_end."""
    x_start: float
    x_end: float
    traction: float = 1.0      # (0, 1], scales commanded speed
    breakaway: float = 0.0     # m/s, below this the wheels spin in place
    bumpiness: float = 0.0     # [0, 1), random per-step traction loss
    name: str = ""

    def __post_init__(self) -> None:
        if self.x_end <= self.x_start:
            raise ValueError(f"terrain segment {self.name!r} has x_end <= x_start")
        if not 0.0 < self.traction <= 1.0:
            raise ValueError(f"traction must be in (0, 1], got {self.traction}")
        if self.breakaway < 0:
            raise ValueError(f"breakaway must be >= 0, got {self.breakaway}")
        if not 0.0 <= self.bumpiness < 1.0:
            raise ValueError(f"bumpiness must be in [0, 1), got {self.bumpiness}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "x_start": self.x_start,
            "x_end": self.x_end,
            "traction": self.traction,
            "breakaway": self.breakaway,
            "bumpiness": self.bumpiness,
        }

    @classmethod
    def from_dict(cls, data: dict) -> TerrainSegment:
        return cls(
            x_start=float(data["x_start"]),
            x_end=float(data["x_end"]),
            traction=float(data.get("traction", 1.0)),
            breakaway=float(data.get("breakaway", 0.0)),
            bumpiness=float(data.get("bumpiness", 0.0)),
            name=str(data.get("name", "")),
        )


DEFAULT_SEGMENT = TerrainSegment(-math.inf, math.inf, name="floor")


@dataclass
class TerrainProfile:
    """Ordered, non-overlapping segments; uncovered floor is ideal."""
    segments: list[TerrainSegment] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.segments = sorted(self.segments, key=lambda s: s.x_start)
        for a, b in zip(self.segments, self.segments[1:]):
            if b.x_start < a.x_end:
                raise ValueError(f"terrain segments {a.name!r} and {b.name!r} overlap")

    def segment_at(self, x: float) -> TerrainSegment:
        for seg in self.segments:
            if seg.x_start <= x < seg.x_end:
                return seg
        return DEFAULT_SEGMENT

    def to_dict(self) -> dict:
        return {"segments": [s.to_dict() for s in self.segments]}

    @classmethod
    def from_list(cls, items: Optional[list[dict]]) -> TerrainProfile:
        return cls([TerrainSegment.from_dict(d) for d in items or []])
