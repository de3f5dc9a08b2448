"""Pseudo-label generation and unsupervised fine-tuning."""

from __future__ import annotations

import json
import shutil
from pathlib import Path

from ..errors import IoFailure
from ..numcore.optim import FreezeMask
from ..simworld.dataset import load_manifest
from .infer import load_model, predict_dataset
from .stages import DEFAULT_BATCH, FINETUNE_EPOCHS, FINETUNE_LR, StageSpec, train_stage

DEFAULT_PSEUDO_THRESHOLD = 0.3


def generate_pseudo_labels(teacher_ckpt, unlabeled_dataset, out_dir,
                           threshold: float = DEFAULT_PSEUDO_THRESHOLD) -> Path:
    """Teacher inference over a dataset; writes a dataset-shaped directory whose
    box files come from thresholded detections. Ground truth is never read."""
    model, cfg = load_model(teacher_ckpt)
    manifest = load_manifest(unlabeled_dataset)
    src = Path(unlabeled_dataset)
    out = Path(out_dir)
    dets = predict_dataset(model, cfg, src)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for frame_id in range(manifest["n_frames"]):
            stem = f"{frame_id:06d}"
            shutil.copyfile(src / f"{stem}.pts", out / f"{stem}.pts")
            boxes = [
                {
                    "center": [float(v) for v in d.box.center],
                    "size": [float(v) for v in d.box.size],
                    "yaw": float(d.box.yaw),
                    "class": d.box.cls.name,
                }
                for d in dets[frame_id] if d.score >= threshold
            ]
            (out / f"{stem}.json").write_text(json.dumps(boxes, indent=1, sort_keys=True) + "\n")
        pseudo_manifest = dict(manifest)
        pseudo_manifest["pseudo_labels"] = {
            "teacher": str(teacher_ckpt),
            "threshold": threshold,
        }
        (out / "manifest.json").write_text(
            json.dumps(pseudo_manifest, indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(f"failed writing pseudo-label dataset to {out}: {exc}") from exc
    return out


def uda_finetune(student_ckpt, pseudo_dataset, out_ckpt,
                 freeze: FreezeMask = FreezeMask(),
                 epochs: int = FINETUNE_EPOCHS, lr: float = FINETUNE_LR,
                 batch_size: int = DEFAULT_BATCH, seed: int = 0,
                 log_path=None) -> list[dict]:
    """Fine-tune a student on pseudo-labeled frames.

    Frames with zero pseudo-boxes stay in the batch stream: they contribute
    background focal loss only.
    """
    spec = StageSpec(
        stage_kind="pseudo_label_finetune",
        datasets=[(str(pseudo_dataset), 1.0)],
        init={"checkpoint": str(student_ckpt)},
        freeze=freeze,
        epochs=epochs,
        learning_rate=lr,
        batch_size=batch_size,
        seed=seed,
    )
    return train_stage(spec, out_ckpt, log_path=log_path)
