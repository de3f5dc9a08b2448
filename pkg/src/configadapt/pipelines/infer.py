"""Batch inference and evaluation of a checkpoint over a dataset."""

from __future__ import annotations

from pathlib import Path

from ..detector.config import DetectorConfig
from ..detector.decode import decode
from ..detector.model import Detector, HeadOutput
from ..detector.pillars import pillarize
from ..errors import CheckpointMissing
from ..evalkit.matching import MatchConfig
from ..evalkit.report import EvalReport, evaluate
from ..simworld.dataset import load_all_frames
from ..cli.ckptfile import load_checkpoint


def load_model(ckpt_path) -> tuple[Detector, DetectorConfig]:
    params, meta = load_checkpoint(ckpt_path)
    if "detector" not in meta:
        raise CheckpointMissing(f"{ckpt_path} has no detector config metadata")
    cfg = DetectorConfig.from_dict(meta["detector"])
    return Detector(cfg, params=params), cfg


def predict_dataset(model: Detector, cfg: DetectorConfig, dataset_dir,
                    batch_size: int = 8) -> dict:
    """frame_id -> list of Detection for every frame in the dataset."""
    frames = load_all_frames(dataset_dir)
    dets = {}
    for start in range(0, len(frames), batch_size):
        chunk = frames[start:start + batch_size]
        grids = [pillarize(f.points, cfg) for f in chunk]
        out = model.forward(grids).numpy()
        for i, frame in enumerate(chunk):
            single = HeadOutput(heatmap=out.heatmap[i:i + 1],
                                regression=out.regression[i:i + 1])
            dets[frame.frame_id] = decode(single, cfg)
    return dets


def evaluate_checkpoint(ckpt_path, dataset_dir,
                        match_cfg: MatchConfig = MatchConfig()) -> EvalReport:
    model, cfg = load_model(ckpt_path)
    dets = predict_dataset(model, cfg, dataset_dir)
    gts = {f.frame_id: list(f.boxes) for f in load_all_frames(dataset_dir)}
    return evaluate(dets, gts, match_cfg)
