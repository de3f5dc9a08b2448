"""Training regimens: base/joint training, fine-tuning, pseudo-label adaptation.

A stage consumes dataset directories and an init (seed or checkpoint) and
produces a checkpoint plus a JSON-lines training log. Stages chain through
checkpoints only, and every random choice derives from the stage seed, so a
replayed stage is bit-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..detector.config import DetectorConfig
from ..detector.losses import detection_loss
from ..detector.model import Detector
from ..detector.pillars import pillarize
from ..detector.targets import build_targets
from ..errors import CheckpointMissing, DatasetMissing
from ..numcore.optim import Adam, FreezeMask
from ..simworld.dataset import load_all_frames, stable_hash
from ..cli.ckptfile import load_checkpoint, save_checkpoint

STAGE_KINDS = ("base_train", "finetune", "pseudo_label_finetune")

# stated defaults; recipes use a faster profile
BASE_EPOCHS, BASE_LR = 40, 1e-3
FINETUNE_EPOCHS, FINETUNE_LR = 10, 1e-4
DEFAULT_BATCH = 4


@dataclass
class StageSpec:
    stage_kind: str
    datasets: list[tuple[str, float]]
    init: dict  # {"random": seed} or {"checkpoint": path}
    freeze: FreezeMask = field(default_factory=FreezeMask)
    epochs: int = BASE_EPOCHS
    learning_rate: float = BASE_LR
    batch_size: int = DEFAULT_BATCH
    seed: int = 0

    def __post_init__(self):
        if self.stage_kind not in STAGE_KINDS:
            raise ValueError(f"stage_kind must be one of {STAGE_KINDS}")
        for _, frac in self.datasets:
            if not 0.0 < frac <= 1.0:
                raise ValueError(f"fraction must be in (0, 1], got {frac}")
        if self.stage_kind != "base_train" and "checkpoint" not in self.init:
            raise ValueError("finetune stages require checkpoint init")

    def to_json(self) -> dict:
        return {
            "stage_kind": self.stage_kind,
            "datasets": [[str(p), f] for p, f in self.datasets],
            "init": self.init,
            "freeze": self.freeze.to_list(),
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StageSpec":
        return cls(
            stage_kind=obj["stage_kind"],
            datasets=[(p, f) for p, f in obj["datasets"]],
            init=obj["init"],
            freeze=FreezeMask(frozenset(obj["freeze"])),
            epochs=obj["epochs"],
            learning_rate=obj["learning_rate"],
            batch_size=obj["batch_size"],
            seed=obj["seed"],
        )


def subsample_indices(n: int, fraction: float, seed: int) -> np.ndarray:
    """First ceil(fraction * n) entries of a seed-shuffled order (nested in fraction)."""
    order = np.random.default_rng(seed).permutation(n)
    take = int(np.ceil(fraction * n))
    return order[:take]


# pillar/target cache shared across stages in one process
_frame_cache: dict = {}


def _prepare_frames(spec: StageSpec, cfg: DetectorConfig):
    """(dataset_idx, pillars, targets) for the subsampled, concatenated frame list."""
    prepared = []
    for ds_idx, (path, fraction) in enumerate(spec.datasets):
        root = Path(path)
        if not (root / "manifest.json").is_file():
            raise DatasetMissing(f"no dataset at {root}")
        frames = load_all_frames(root)
        sub_seed = stable_hash(spec.seed, "subsample", ds_idx)
        for i in subsample_indices(len(frames), fraction, sub_seed):
            frame = frames[int(i)]
            key = (str(root), frame.frame_id, json.dumps(cfg.to_dict(), sort_keys=True))
            if key not in _frame_cache:
                _frame_cache[key] = (pillarize(frame.points, cfg),
                                     build_targets(list(frame.boxes), cfg))
            grid, tgt = _frame_cache[key]
            prepared.append((ds_idx, grid, tgt))
    return prepared


def _resolve_init(spec: StageSpec, cfg: DetectorConfig | None):
    if "checkpoint" in spec.init:
        params, meta = load_checkpoint(spec.init["checkpoint"])
        if "detector" not in meta:
            raise CheckpointMissing(
                f"{spec.init['checkpoint']} has no detector config metadata")
        cfg = DetectorConfig.from_dict(meta["detector"])
        model = Detector(cfg, params=params)
    else:
        if cfg is None:
            raise ValueError("random init requires a detector config")
        model = Detector(cfg, seed=int(spec.init["random"]))
    return model, cfg


def train_stage(spec: StageSpec, out_ckpt, cfg: DetectorConfig | None = None,
                log_path=None) -> list[dict]:
    """Run one stage; writes the checkpoint and returns the per-epoch log."""
    model, cfg = _resolve_init(spec, cfg)
    prepared = _prepare_frames(spec, cfg)
    model.set_trainable(spec.freeze.trainable)
    trainable = {k: p for k, p in model.params.items() if p.requires_grad}
    opt = Adam(trainable, lr=spec.learning_rate)

    log: list[dict] = []
    for epoch in range(spec.epochs):
        order = np.random.default_rng(
            stable_hash(spec.seed, "epoch", epoch)).permutation(len(prepared))
        losses = []
        batch_counts = {i: 0 for i in range(len(spec.datasets))}
        for start in range(0, len(order), spec.batch_size):
            batch = [prepared[int(i)] for i in order[start:start + spec.batch_size]]
            for ds_idx in {b[0] for b in batch}:
                batch_counts[ds_idx] += 1
            if trainable:
                pred = model.forward([b[1] for b in batch])
                loss = detection_loss(pred, [b[2] for b in batch])
                opt.zero_grad()
                loss.backward()
                opt.step()
                losses.append(loss.item())
        log.append({
            "epoch": epoch,
            "mean_loss": float(np.mean(losses)) if losses else None,
            "frames_seen": len(prepared),
            "per_dataset_batch_counts": {
                str(spec.datasets[i][0]): c for i, c in batch_counts.items()},
        })

    metadata = {
        "detector": cfg.to_dict(),
        "stage": spec.to_json(),
    }
    save_checkpoint(out_ckpt, model.state_dict(), metadata)
    if log_path is not None:
        Path(log_path).write_text(
            "".join(json.dumps(entry, sort_keys=True) + "\n" for entry in log))
    return log


DEFAULT_FT_MASK = FreezeMask(frozenset({"backbone", "neck"}))


def downstream_finetune(base_ckpt, target_dataset, out_ckpt,
                        freeze: FreezeMask = DEFAULT_FT_MASK,
                        epochs: int = FINETUNE_EPOCHS, lr: float = FINETUNE_LR,
                        batch_size: int = DEFAULT_BATCH, seed: int = 0,
                        log_path=None) -> list[dict]:
    spec = StageSpec(
        stage_kind="finetune",
        datasets=[(str(target_dataset), 1.0)],
        init={"checkpoint": str(base_ckpt)},
        freeze=freeze,
        epochs=epochs,
        learning_rate=lr,
        batch_size=batch_size,
        seed=seed,
    )
    return train_stage(spec, out_ckpt, log_path=log_path)
