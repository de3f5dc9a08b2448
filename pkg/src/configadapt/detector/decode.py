"""Heatmap peak decoding into scored boxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..simworld.types import Box3D, ObjectClass
from .config import DetectorConfig
from .model import HeadOutput


@dataclass(frozen=True)
class Detection:
    box: Box3D
    score: float


def _local_maxima_3x3(hm: np.ndarray) -> np.ndarray:
    """Boolean mask of cells that are the max of their 3x3 neighborhood."""
    padded = np.pad(hm, 1, constant_values=-np.inf)
    neigh = np.stack([padded[1 + dy:1 + dy + hm.shape[0], 1 + dx:1 + dx + hm.shape[1]]
                      for dy in (-1, 0, 1) for dx in (-1, 0, 1)])
    return hm >= neigh.max(axis=0)


def decode(pred: HeadOutput, cfg: DetectorConfig) -> list[Detection]:
    """Top-k 3x3 local maxima above the score threshold, one frame."""
    out = pred.numpy()
    hm = out.heatmap
    reg = out.regression
    if hm.ndim == 4:
        if hm.shape[0] != 1:
            raise ValueError("decode() takes a single frame; loop over the batch")
        hm, reg = hm[0], reg[0]

    peaks = []
    for cls in range(hm.shape[0]):
        keep = _local_maxima_3x3(hm[cls]) & (hm[cls] >= cfg.score_threshold)
        for cy, cx in np.argwhere(keep):
            peaks.append((float(hm[cls, cy, cx]), cls, int(cy), int(cx)))
    peaks.sort(key=lambda p: (-p[0], p[1], p[2], p[3]))
    peaks = peaks[: cfg.top_k]

    cell = cfg.head_cell_size
    r_ext = cfg.range_half_extent
    dets = []
    for score, cls, cy, cx in peaks:
        dx, dy, z, ll, lw, lh, sy, cyaw = (float(v) for v in reg[:, cy, cx])
        center = ((cx + 0.5) * cell - r_ext + dx, (cy + 0.5) * cell - r_ext + dy, z)
        size = (float(np.exp(ll)), float(np.exp(lw)), float(np.exp(lh)))
        yaw = float(np.arctan2(sy, cyaw))
        dets.append(Detection(
            box=Box3D(center=center, size=size, yaw=yaw, cls=ObjectClass(cls)),
            score=score))
    return dets
