"""Random scene layout via rejection sampling.

Objects are upright boxes resting on the ground plane. Footprints may not
overlap each other (separating-axis test) and may not encroach on a square
keep-out region around the ego vehicle.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import PlacementExhausted
from .types import CLASS_SIZE_MEANS, Box3D, ObjectClass, SceneSpec

MAX_ATTEMPTS = 1000


def _axes(corners: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out = []
    for i in (0, 1):
        ex = corners[i + 1][0] - corners[i][0]
        ey = corners[i + 1][1] - corners[i][1]
        n = math.hypot(ex, ey)
        out.append((ex / n, ey / n))
    return out


def footprints_overlap(a: list[tuple[float, float]], b: list[tuple[float, float]]) -> bool:
    """True when two convex BEV quadrilaterals overlap (separating axis theorem)."""
    for ax, ay in _axes(a) + _axes(b):
        pa = [x * ax + y * ay for x, y in a]
        pb = [x * ax + y * ay for x, y in b]
        if max(pa) < min(pb) or max(pb) < min(pa):
            return False
    return True


def _sample_size(rng: np.random.Generator, cls: ObjectClass, sigma_frac: float):
    mean = CLASS_SIZE_MEANS[cls]
    dims = []
    for m in mean:
        # truncate at 3 sigma so dimensions stay positive
        z = float(np.clip(rng.normal(), -3.0, 3.0))
        dims.append(m * (1.0 + sigma_frac * z))
    return tuple(dims)


def sample_scene(spec: SceneSpec, seed: int) -> list[Box3D]:
    """Draw a non-overlapping set of boxes; deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    r = spec.keepout_radius
    keepout = [(r, r), (-r, r), (-r, -r), (r, -r)]
    placed: list[Box3D] = []
    footprints: list[list[tuple[float, float]]] = []
    for cls in ObjectClass:
        lo, hi = spec.count_ranges.get(cls, (0, 0))
        n = int(rng.integers(lo, hi + 1))
        for _ in range(n):
            for attempt in range(MAX_ATTEMPTS):
                size = _sample_size(rng, cls, spec.size_sigma_frac)
                ext = spec.area_half_extent - max(size[0], size[1]) / 2.0
                ext = max(ext, 1.0)
                cx = float(rng.uniform(-ext, ext))
                cy = float(rng.uniform(-ext, ext))
                yaw = float(rng.uniform(-math.pi, math.pi))
                box = Box3D(center=(cx, cy, size[2] / 2.0), size=size, yaw=yaw, cls=cls)
                fp = box.footprint()
                if footprints_overlap(fp, keepout):
                    continue
                if any(footprints_overlap(fp, other) for other in footprints):
                    continue
                placed.append(box)
                footprints.append(fp)
                break
            else:
                raise PlacementExhausted(
                    f"could not place {cls.name} after {MAX_ATTEMPTS} attempts")
    return placed
