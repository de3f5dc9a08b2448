"""Detector configuration and the teacher-widening rule."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class DetectorConfig:
    """Pillar-BEV detector geometry and capacity.

    The BEV square spans +-range_half_extent in x and y; the pillar grid has
    2R / pillar_size cells per side and must be divisible by 4 (two stride-2
    backbone stages). The head operates at half the pillar-grid resolution.
    """

    range_half_extent: float = 38.4
    pillar_size: float = 0.6
    z_range: tuple[float, float] = (-1.0, 5.0)
    max_points_per_pillar: int = 20
    max_pillars: int = 4096
    c_encoder: int = 16
    c_stage1: int = 32
    c_stage2: int = 64
    c_neck: int = 64
    score_threshold: float = 0.2
    top_k: int = 64

    def __post_init__(self):
        if self.pillar_size <= 0:
            raise ValueError("pillar_size must be positive")
        g = 2.0 * self.range_half_extent / self.pillar_size
        if abs(g - round(g)) > 1e-9 or int(round(g)) % 4 != 0:
            raise ValueError(f"grid must be an integer divisible by 4, got {g}")

    @property
    def grid(self) -> int:
        return int(round(2.0 * self.range_half_extent / self.pillar_size))

    @property
    def head_grid(self) -> int:
        return self.grid // 2

    @property
    def head_cell_size(self) -> float:
        return 2.0 * self.pillar_size

    def to_dict(self) -> dict:
        return {
            "range_half_extent": self.range_half_extent,
            "pillar_size": self.pillar_size,
            "z_range": list(self.z_range),
            "max_points_per_pillar": self.max_points_per_pillar,
            "max_pillars": self.max_pillars,
            "c_encoder": self.c_encoder,
            "c_stage1": self.c_stage1,
            "c_stage2": self.c_stage2,
            "c_neck": self.c_neck,
            "score_threshold": self.score_threshold,
            "top_k": self.top_k,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorConfig":
        d = dict(d)
        d["z_range"] = tuple(d["z_range"])
        return cls(**d)


def make_teacher(cfg: DetectorConfig) -> DetectorConfig:
    """Higher-capacity offline config: finer pillars, doubled channel widths."""
    return replace(
        cfg,
        pillar_size=cfg.pillar_size / 2.0,
        c_encoder=cfg.c_encoder * 2,
        c_stage1=cfg.c_stage1 * 2,
        c_stage2=cfg.c_stage2 * 2,
        c_neck=cfg.c_neck * 2,
    )
