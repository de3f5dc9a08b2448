"""Freeze-mask ablation grid over downstream fine-tuning."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from ..numcore.optim import MODULE_TAGS, FreezeMask
from ..simworld.types import CLASS_NAMES
from .infer import evaluate_checkpoint
from .stages import DEFAULT_BATCH, FINETUNE_EPOCHS, FINETUNE_LR, downstream_finetune

# the eight standard ablation rows, in row order
TABLE3_MASKS = (
    frozenset(),
    frozenset({"head"}),
    frozenset({"backbone"}),
    frozenset({"encoder", "backbone"}),
    frozenset({"encoder", "backbone", "neck"}),
    frozenset({"backbone", "neck"}),
    frozenset({"backbone", "neck", "head"}),
    frozenset({"encoder", "backbone", "neck", "head"}),
)

ALL_MASKS = tuple(
    frozenset(m for m, bit in zip(MODULE_TAGS, bits) if bit)
    for bits in ((b >> 3 & 1, b >> 2 & 1, b >> 1 & 1, b & 1) for b in range(16))
)

GRID_COLUMNS = list(MODULE_TAGS) + ["mAP"] + CLASS_NAMES


def mask_label(mask: frozenset) -> str:
    return "+".join(m for m in MODULE_TAGS if m in mask) or "none"


def ablation_grid(base_ckpt, target_dataset, eval_dataset, out_dir,
                  masks=TABLE3_MASKS, epochs: int = FINETUNE_EPOCHS,
                  lr: float = FINETUNE_LR, batch_size: int = DEFAULT_BATCH,
                  seed: int = 0) -> tuple[str, dict]:
    """Fine-tune once per mask, evaluate each, and emit a table-shaped CSV.

    The empty mask never changes parameters, so its row equals evaluating the
    base checkpoint directly. Returns (csv_text, mask_label -> ckpt path).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=GRID_COLUMNS, lineterminator="\n")
    writer.writeheader()
    ckpts = {}
    for mask in masks:
        label = mask_label(mask)
        ckpt = out / f"ft_{label.replace('+', '_')}.ckpt"
        downstream_finetune(base_ckpt, target_dataset, ckpt,
                            freeze=FreezeMask(mask), epochs=epochs, lr=lr,
                            batch_size=batch_size, seed=seed)
        report = evaluate_checkpoint(ckpt, eval_dataset)
        row = {m: int(m in mask) for m in MODULE_TAGS}
        row["mAP"] = f"{report.map:.6f}"
        for name in CLASS_NAMES:
            ap = report.per_class[name]["ap"]
            row[name] = "" if ap is None else f"{ap:.6f}"
        writer.writerow(row)
        ckpts[label] = ckpt
    csv_text = buf.getvalue()
    (out / "ablation.csv").write_text(csv_text)
    return csv_text, ckpts
