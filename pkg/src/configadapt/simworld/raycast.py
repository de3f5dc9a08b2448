"""Multi-LiDAR ray casting against boxes and the ground plane.

Each mount shoots an azimuth x elevation grid of rays. A ray returns the
nearest intersection among scene boxes, the ego body, and the ground plane
z=0, within max_range. Rays whose nearest surface is the ego body are
discarded: body shadowing is the mechanism that gives each rig its
characteristic blind spots.
"""

from __future__ import annotations

import numpy as np

from .types import Box3D, LidarMount, SensorRig

EPS = 1e-9
BIG = np.inf


def _ray_box_entry(origins: np.ndarray, dirs: np.ndarray, box: Box3D):
    """Slab test in the box frame.

    Returns (tmin, tmax) per ray; entry/exit parameters of the infinite ray
    against the box. Rays that miss get tmin > tmax.
    """
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    # rotate world -> box frame (inverse yaw)
    rel = origins - np.asarray(box.center)
    o = np.empty_like(rel)
    o[:, 0] = rel[:, 0] * c + rel[:, 1] * s
    o[:, 1] = -rel[:, 0] * s + rel[:, 1] * c
    o[:, 2] = rel[:, 2]
    d = np.empty_like(dirs)
    d[:, 0] = dirs[:, 0] * c + dirs[:, 1] * s
    d[:, 1] = -dirs[:, 0] * s + dirs[:, 1] * c
    d[:, 2] = dirs[:, 2]

    half = np.asarray(box.size) / 2.0
    tmin = np.full(len(o), -BIG)
    tmax = np.full(len(o), BIG)
    for ax in range(3):
        da = d[:, ax]
        oa = o[:, ax]
        parallel = np.abs(da) < 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-half[ax] - oa) / da
            t2 = (half[ax] - oa) / da
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        # parallel rays hit the slab iff the origin lies inside it
        inside = np.abs(oa) <= half[ax]
        lo = np.where(parallel, np.where(inside, -BIG, BIG), lo)
        hi = np.where(parallel, np.where(inside, BIG, -BIG), hi)
        tmin = np.maximum(tmin, lo)
        tmax = np.minimum(tmax, hi)
    return tmin, tmax


def mount_directions(mount: LidarMount) -> np.ndarray:
    """Unit direction grid (azimuth_steps * beams, 3), fixed scan order."""
    az = np.linspace(0.0, 2.0 * np.pi, mount.azimuth_steps, endpoint=False)
    el = np.deg2rad(np.linspace(mount.elevation_range[0], mount.elevation_range[1],
                                mount.beams))
    a, e = np.meshgrid(az, el, indexing="ij")
    a, e = a.ravel(), e.ravel()
    return np.stack([np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), np.sin(e)], axis=1)


def raycast(rig: SensorRig, boxes: list[Box3D], seed: int) -> np.ndarray:
    """Simulate one frame; returns an (N, 4) float32 array of x, y, z, intensity."""
    rng = np.random.default_rng(seed)
    clouds = []
    for mount in rig.mounts:
        dirs = mount_directions(mount)
        n_rays = len(dirs)
        origins = np.broadcast_to(np.asarray(mount.origin, dtype=np.float64),
                                  (n_rays, 3)).copy()

        # candidate hit distance per surface; order: boxes..., ground, ego
        t_cols = []
        for box in boxes:
            tmin, tmax = _ray_box_entry(origins, dirs, box)
            hit = (tmax >= tmin) & (tmin > EPS)
            t_cols.append(np.where(hit, tmin, BIG))

        dz = dirs[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            t_ground = np.where(dz < -1e-12, -origins[:, 2] / dz, BIG)
        t_ground = np.where(t_ground > EPS, t_ground, BIG)
        t_cols.append(t_ground)

        tmin_e, tmax_e = _ray_box_entry(origins, dirs, rig.ego_body)
        # The body blocks any ray whose forward segment passes through it,
        # including rays leaving a mount seated on the body surface.
        blocked = (tmax_e >= tmin_e) & (tmax_e > EPS)
        t_cols.append(np.where(blocked, np.maximum(tmin_e, 0.0), BIG))

        t_all = np.stack(t_cols, axis=1)
        nearest = np.argmin(t_all, axis=1)
        t_hit = t_all[np.arange(n_rays), nearest]
        keep = (t_hit <= mount.max_range) & (nearest != t_all.shape[1] - 1)

        noise = rng.normal(0.0, 1.0, size=n_rays) * mount.range_noise_sigma
        d = np.clip(t_hit + noise, 1e-6, mount.max_range)
        pts = origins[keep] + d[keep, None] * dirs[keep]
        intensity = np.clip(1.0 - d[keep] / mount.max_range, 0.0, 1.0)
        clouds.append(np.column_stack([pts, intensity]).astype(np.float32))
    if not clouds:
        return np.zeros((0, 4), dtype=np.float32)
    return np.concatenate(clouds, axis=0)
