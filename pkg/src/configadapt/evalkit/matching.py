"""Distance-based greedy matching and AP integration (nuScenes convention)."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class MatchConfig:
    thresholds: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    min_recall: float = 0.1
    min_precision: float = 0.1

    def __post_init__(self):
        if list(self.thresholds) != sorted(self.thresholds):
            raise ValueError("thresholds must be sorted ascending")


def _center_dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def match_pooled(dets_by_frame: dict, gt_centers_by_frame: dict, threshold: float):
    """Greedy matching pooled over frames.

    dets_by_frame: frame_id -> list of (score, (x, y)). Detections are swept
    in descending score order (ties by frame then input order); each one
    matches the nearest unmatched ground-truth center of its frame within
    `threshold` BEV meters. Returns (pr_points, n_gt) where pr_points is the
    cumulative (recall, precision) sweep.
    """
    n_gt = sum(len(v) for v in gt_centers_by_frame.values())
    pool = []
    for fid in sorted(dets_by_frame):
        for order, (score, xy) in enumerate(dets_by_frame[fid]):
            pool.append((-score, fid, order, xy))
    pool.sort(key=lambda p: (p[0], p[1], p[2]))

    unmatched = {fid: list(range(len(g))) for fid, g in gt_centers_by_frame.items()}
    pr = []
    tp = 0
    for i, (negscore, fid, _, xy) in enumerate(pool):
        best_j, best_d = None, None
        for j in unmatched.get(fid, ()):
            d = _center_dist(xy, gt_centers_by_frame[fid][j])
            if d <= threshold and (best_d is None or d < best_d):
                best_j, best_d = j, d
        if best_j is not None:
            unmatched[fid].remove(best_j)
            tp += 1
        recall = tp / n_gt if n_gt else 0.0
        pr.append((recall, tp / (i + 1)))
    return pr, n_gt


def match_class(dets, gts, threshold: float):
    """Single-collection form: dets are (score, (x, y)) sorted descending."""
    pr, _ = match_pooled({0: list(dets)}, {0: [g for g in gts]}, threshold)
    return pr


def ap_from_pr(pr_points, cfg: MatchConfig = MatchConfig()) -> float:
    """Normalized area above the precision floor for recall beyond the floor.

    Precision is linearly interpolated on a 101-point recall grid; samples at
    recall <= min_recall are dropped, min_precision is subtracted and clipped
    at zero, and the mean is renormalized by (1 - min_precision).
    """
    if not pr_points:
        return 0.0
    import numpy as np

    # at equal recall keep the best precision, making recall strictly increasing
    best: dict[float, float] = {}
    for r, p in pr_points:
        if r not in best or p > best[r]:
            best[r] = p
    rec = np.array(sorted(best))
    prec = np.array([best[r] for r in rec])
    grid = np.linspace(0.0, 1.0, 101)
    prec_i = np.interp(grid, rec, prec, right=0.0)
    start = int(round(100 * cfg.min_recall)) + 1
    vals = np.clip(prec_i[start:] - cfg.min_precision, 0.0, None)
    # correctly-rounded sum so degenerate sweeps give exact 0.0 / 0.5 / 1.0
    mean = math.fsum(float(v) for v in vals) / len(vals)
    return mean / (1.0 - cfg.min_precision)
