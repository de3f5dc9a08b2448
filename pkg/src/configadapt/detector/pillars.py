"""Point cloud -> pillar grid conversion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DetectorConfig

N_POINT_FEATURES = 7  # x, y, z, intensity, dx-to-pillar-center, dy, range


@dataclass
class PillarGrid:
    """Non-empty pillars only: features (P, K, 7), validity (P, K), cell indices."""

    features: np.ndarray
    valid: np.ndarray
    ix: np.ndarray
    iy: np.ndarray

    @property
    def n_pillars(self) -> int:
        return len(self.ix)


def _empty(cfg: DetectorConfig) -> PillarGrid:
    return PillarGrid(
        features=np.zeros((0, cfg.max_points_per_pillar, N_POINT_FEATURES),
                          dtype=np.float32),
        valid=np.zeros((0, cfg.max_points_per_pillar), dtype=bool),
        ix=np.zeros(0, dtype=np.int64),
        iy=np.zeros(0, dtype=np.int64),
    )


def pillarize(points: np.ndarray, cfg: DetectorConfig) -> PillarGrid:
    """Group in-range points into pillars, capped per pillar by arrival order.

    Points outside the BEV square or the z range are dropped. Pillars are
    ordered by first appearance and truncated at max_pillars, so the result
    is deterministic for a fixed point order.
    """
    r = cfg.range_half_extent
    pts = np.asarray(points, dtype=np.float32).reshape(-1, 4)
    in_range = (
        (pts[:, 0] >= -r) & (pts[:, 0] < r)
        & (pts[:, 1] >= -r) & (pts[:, 1] < r)
        & (pts[:, 2] >= cfg.z_range[0]) & (pts[:, 2] <= cfg.z_range[1])
    )
    pts = pts[in_range]
    if len(pts) == 0:
        return _empty(cfg)

    ix = np.floor((pts[:, 0] + r) / cfg.pillar_size).astype(np.int64)
    iy = np.floor((pts[:, 1] + r) / cfg.pillar_size).astype(np.int64)
    cell = iy * cfg.grid + ix

    # pillar ids in first-appearance order
    _, first_idx, inverse = np.unique(cell, return_index=True, return_inverse=True)
    appearance_rank = np.empty(len(first_idx), dtype=np.int64)
    appearance_rank[np.argsort(first_idx, kind="stable")] = np.arange(len(first_idx))
    pillar_id = appearance_rank[inverse]

    # arrival rank of each point within its pillar
    order = np.argsort(pillar_id, kind="stable")
    sorted_ids = pillar_id[order]
    run_start = np.flatnonzero(np.r_[True, sorted_ids[1:] != sorted_ids[:-1]])
    counts = np.diff(np.r_[run_start, len(sorted_ids)])
    within = np.arange(len(sorted_ids)) - np.repeat(run_start, counts)
    point_rank = np.empty(len(pts), dtype=np.int64)
    point_rank[order] = within

    k = cfg.max_points_per_pillar
    keep = (point_rank < k) & (pillar_id < cfg.max_pillars)
    p = int(min(len(first_idx), cfg.max_pillars))

    feats = np.zeros((p, k, N_POINT_FEATURES), dtype=np.float32)
    valid = np.zeros((p, k), dtype=bool)
    pk, rk = pillar_id[keep], point_rank[keep]
    kept = pts[keep]
    cx = ((ix[keep] + 0.5) * cfg.pillar_size - r).astype(np.float32)
    cy = ((iy[keep] + 0.5) * cfg.pillar_size - r).astype(np.float32)
    feats[pk, rk, 0:4] = kept
    feats[pk, rk, 4] = kept[:, 0] - cx
    feats[pk, rk, 5] = kept[:, 1] - cy
    feats[pk, rk, 6] = np.sqrt((kept[:, :3].astype(np.float64) ** 2).sum(axis=1))
    valid[pk, rk] = True

    cell_of_pillar = np.empty(len(first_idx), dtype=np.int64)
    cell_of_pillar[appearance_rank] = cell[first_idx]
    cell_of_pillar = cell_of_pillar[:p]
    return PillarGrid(features=feats, valid=valid,
                      ix=cell_of_pillar % cfg.grid, iy=cell_of_pillar // cfg.grid)
