"""Per-class AP tables shaped like the experiment summaries."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import FrameMismatch
from ..simworld.types import CLASS_NAMES, ObjectClass
from .matching import MatchConfig, ap_from_pr, match_pooled

CSV_HEADER = "mAP,Car,Truck,Bus,Bicycle,Pedestrian"


@dataclass
class EvalReport:
    map: float
    per_class: dict[str, dict]
    n_frames: int
    n_dets: int
    excluded_classes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "map": self.map,
            "per_class": self.per_class,
            "n_frames": self.n_frames,
            "n_dets": self.n_dets,
            "excluded_classes": self.excluded_classes,
        }, indent=1, sort_keys=True)

    def csv_row(self) -> str:
        cells = [f"{self.map:.6f}"]
        for name in CLASS_NAMES:
            ap = self.per_class[name]["ap"]
            cells.append("" if ap is None else f"{ap:.6f}")
        return ",".join(cells)


def evaluate(dets_per_frame: dict, gts_per_frame: dict,
             cfg: MatchConfig = MatchConfig()) -> EvalReport:
    """dets_per_frame: frame_id -> list of Detection; gts: frame_id -> list of Box3D.

    Classes with no ground truth anywhere in the split are excluded from the
    mAP mean and reported. Detection frame ids must be a subset of GT ids.
    """
    extra = set(dets_per_frame) - set(gts_per_frame)
    if extra:
        raise FrameMismatch(f"detections for unknown frames: {sorted(extra)[:5]}")

    per_class = {}
    class_aps = []
    excluded = []
    total_dets = sum(len(v) for v in dets_per_frame.values())
    for cls in ObjectClass:
        gt_centers = {
            fid: [b.center for b in boxes if b.cls == cls]
            for fid, boxes in gts_per_frame.items()
        }
        dets = {
            fid: [(d.score, d.box.center) for d in dets_per_frame.get(fid, [])
                  if d.box.cls == cls]
            for fid in gts_per_frame
        }
        n_gt = sum(len(v) for v in gt_centers.values())
        if n_gt == 0:
            per_class[cls.name] = {"ap": None, "ap_per_threshold": []}
            excluded.append(cls.name)
            continue
        aps = []
        for thr in cfg.thresholds:
            pr, _ = match_pooled(dets, gt_centers, thr)
            aps.append(ap_from_pr(pr, cfg))
        ap = sum(aps) / len(aps)
        per_class[cls.name] = {"ap": ap, "ap_per_threshold": aps}
        class_aps.append(ap)

    return EvalReport(
        map=sum(class_aps) / len(class_aps) if class_aps else 0.0,
        per_class=per_class,
        n_frames=len(gts_per_frame),
        n_dets=total_dets,
        excluded_classes=excluded,
    )
