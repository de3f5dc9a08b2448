"""Center-heatmap target encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..simworld.types import Box3D
from .config import DetectorConfig
from .model import N_CLASSES, N_REG


@dataclass
class Targets:
    heatmap: np.ndarray      # (5, Hg, Hg), per-cell max of Gaussian splats
    regression: np.ndarray   # (8, Hg, Hg), written only at center cells
    center_mask: np.ndarray  # (Hg, Hg) bool


def gaussian_radius_cells(l: float, w: float, cell_size: float) -> int:
    return max(1, int(round(0.5 * min(l, w) / cell_size)))


def build_targets(boxes: list[Box3D], cfg: DetectorConfig) -> Targets:
    hg = cfg.head_grid
    cell = cfg.head_cell_size
    r_ext = cfg.range_half_extent
    heatmap = np.zeros((N_CLASSES, hg, hg), dtype=np.float32)
    regression = np.zeros((N_REG, hg, hg), dtype=np.float32)
    mask = np.zeros((hg, hg), dtype=bool)

    for box in boxes:
        x, y, z = box.center
        fx = (x + r_ext) / cell
        fy = (y + r_ext) / cell
        cx, cy = int(np.floor(fx)), int(np.floor(fy))
        if not (0 <= cx < hg and 0 <= cy < hg):
            continue
        rad = gaussian_radius_cells(box.size[0], box.size[1], cell)
        sigma = rad / 3.0
        for dy in range(-rad, rad + 1):
            gy = cy + dy
            if not 0 <= gy < hg:
                continue
            for dx in range(-rad, rad + 1):
                gx = cx + dx
                if not 0 <= gx < hg:
                    continue
                val = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
                heatmap[box.cls, gy, gx] = max(heatmap[box.cls, gy, gx], val)
        heatmap[box.cls, cy, cx] = 1.0
        regression[:, cy, cx] = (
            x - ((cx + 0.5) * cell - r_ext),
            y - ((cy + 0.5) * cell - r_ext),
            z,
            np.log(box.size[0]),
            np.log(box.size[1]),
            np.log(box.size[2]),
            np.sin(box.yaw),
            np.cos(box.yaw),
        )
        mask[cy, cx] = True
    return Targets(heatmap=heatmap, regression=regression, center_mask=mask)
