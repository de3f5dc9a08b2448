"""Domain types for the simulated multi-LiDAR world."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum


class ObjectClass(IntEnum):
    Car = 0
    Truck = 1
    Bus = 2
    Bicycle = 3
    Pedestrian = 4


CLASS_NAMES = [c.name for c in ObjectClass]


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    y = math.fmod(yaw + math.pi, 2.0 * math.pi)
    if y <= 0.0:
        y += 2.0 * math.pi
    return y - math.pi


@dataclass(frozen=True)
class Box3D:
    """Oriented 3D box in the ego frame: center (x, y, z), size (l, w, h), yaw."""

    center: tuple[float, float, float]
    size: tuple[float, float, float]
    yaw: float
    cls: ObjectClass

    def __post_init__(self):
        if min(self.size) <= 0.0:
            raise ValueError(f"box size must be positive, got {self.size}")
        object.__setattr__(self, "yaw", normalize_yaw(self.yaw))

    def footprint(self) -> list[tuple[float, float]]:
        """BEV corner polygon (counter-clockwise)."""
        cx, cy, _ = self.center
        hl, hw = self.size[0] / 2.0, self.size[1] / 2.0
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        corners = []
        for dx, dy in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
            corners.append((cx + dx * c - dy * s, cy + dx * s + dy * c))
        return corners


@dataclass(frozen=True)
class LidarMount:
    """One LiDAR unit: pose, beam pattern, range envelope and noise."""

    origin: tuple[float, float, float]
    beams: int
    elevation_range: tuple[float, float]  # degrees (min, max)
    azimuth_steps: int
    max_range: float
    range_noise_sigma: float

    def __post_init__(self):
        if self.beams < 1:
            raise ValueError("beams must be >= 1")
        if self.azimuth_steps < 4:
            raise ValueError("azimuth_steps must be >= 4")
        if self.max_range <= 0.0:
            raise ValueError("max_range must be positive")
        if self.range_noise_sigma < 0.0:
            raise ValueError("range_noise_sigma must be >= 0")


@dataclass(frozen=True)
class SensorRig:
    """A named multi-LiDAR layout plus the self-occluding ego body."""

    name: str
    mounts: tuple[LidarMount, ...]
    ego_body: Box3D


@dataclass(frozen=True)
class Frame:
    """One labeled sample: concatenated point cloud + ground-truth boxes."""

    frame_id: int
    rig: str
    points: "object"  # (N, 4) float32 array of x, y, z, intensity
    boxes: tuple[Box3D, ...]


# Per-class mean (l, w, h) in meters; sigma is 10% per axis, truncated at 3 sigma.
CLASS_SIZE_MEANS: dict[ObjectClass, tuple[float, float, float]] = {
    ObjectClass.Car: (4.5, 1.9, 1.6),
    ObjectClass.Truck: (8.0, 2.5, 3.0),
    ObjectClass.Bus: (11.0, 2.9, 3.2),
    ObjectClass.Bicycle: (1.8, 0.6, 1.6),
    ObjectClass.Pedestrian: (0.7, 0.7, 1.7),
}


@dataclass(frozen=True)
class SceneSpec:
    """Randomized scene recipe: area bound and per-class count ranges."""

    area_half_extent: float = 16.0
    count_ranges: dict = field(default_factory=lambda: {
        ObjectClass.Car: (2, 5),
        ObjectClass.Truck: (0, 2),
        ObjectClass.Bus: (0, 1),
        ObjectClass.Bicycle: (1, 3),
        ObjectClass.Pedestrian: (1, 3),
    })
    size_sigma_frac: float = 0.10
    keepout_radius: float = 6.0  # objects may not encroach on the ego vehicle

    def __post_init__(self):
        for cls, (lo, hi) in self.count_ranges.items():
            if lo < 0 or hi < lo:
                raise ValueError(f"bad count range for {cls}: ({lo}, {hi})")
