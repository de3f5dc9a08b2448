"""Named experiment recipes, one per results table of the study design.

Each recipe materializes the full stage chain for one table on the simulated
two-configuration benchmark, across one or more seeds, and writes per-seed
and mean CSVs plus a provenance file sufficient to replay bit-identically.

The default profile is sized for a laptop core; flags can scale it up.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..ckptdiff.diff import count_params, pairwise_report
from ..detector.config import DetectorConfig, make_teacher
from ..numcore.optim import FreezeMask
from ..pipelines.ablation import TABLE3_MASKS, ablation_grid, mask_label
from ..pipelines.infer import evaluate_checkpoint
from ..pipelines.pseudo import DEFAULT_PSEUDO_THRESHOLD, generate_pseudo_labels, uda_finetune
from ..pipelines.stages import DEFAULT_FT_MASK, StageSpec, downstream_finetune, train_stage
from ..simworld.dataset import generate_dataset, load_manifest
from ..simworld.rigs import make_rig
from ..simworld.types import CLASS_NAMES, SceneSpec
from ..cli.ckptfile import load_checkpoint

RECIPE_NAMES = ("table2a", "table2b", "table3a", "table3b", "table4", "table5")

EVAL_CSV_HEADER = ["condition", "mAP"] + CLASS_NAMES


def desk_detector() -> DetectorConfig:
    return DetectorConfig(range_half_extent=19.2, pillar_size=0.8,
                          c_encoder=8, c_stage1=16, c_stage2=32, c_neck=32)


def desk_scene() -> SceneSpec:
    """Vehicle-only scenes: at desk scale the small classes collect too few
    points per object to be learnable, so they would only add metric noise."""
    from ..simworld.types import ObjectClass
    return SceneSpec(count_ranges={ObjectClass.Car: (2, 5),
                                   ObjectClass.Truck: (1, 2),
                                   ObjectClass.Bus: (0, 1)})


@dataclass
class RecipeProfile:
    """Desk-scale experiment sizing.

    The target configuration (BusSim) gets the larger training set so its
    single-config baseline is well trained, while the joint stage sees only
    `joint_target_fraction` of it: joint training that under-serves the
    target leaves the headroom that downstream fine-tuning then recovers.
    """

    frames_taxi: int = 192
    frames_bus: int = 320
    frames_test: int = 48
    base_epochs: int = 12
    ft_epochs: int = 6
    base_lr: float = 1e-3
    ft_lr: float = 1e-4
    batch_size: int = 4
    data_seed: int = 7
    joint_target_fraction: float = 0.5
    detector: DetectorConfig = field(default_factory=desk_detector)
    scene: SceneSpec = field(default_factory=desk_scene)

    def to_json(self) -> dict:
        return {
            "frames_taxi": self.frames_taxi,
            "frames_bus": self.frames_bus,
            "frames_test": self.frames_test,
            "base_epochs": self.base_epochs,
            "ft_epochs": self.ft_epochs,
            "base_lr": self.base_lr,
            "ft_lr": self.ft_lr,
            "batch_size": self.batch_size,
            "data_seed": self.data_seed,
            "joint_target_fraction": self.joint_target_fraction,
            "detector": self.detector.to_dict(),
        }


def ensure_datasets(data_dir, profile: RecipeProfile) -> dict[str, Path]:
    """Generate the four benchmark datasets unless already present."""
    data_dir = Path(data_dir)
    wanted = {
        "taxi_train": ("taxisim", "train", profile.frames_taxi),
        "bus_train": ("bussim", "train", profile.frames_bus),
        "taxi_test": ("taxisim", "test", profile.frames_test),
        "bus_test": ("bussim", "test", profile.frames_test),
    }
    paths = {}
    for key, (rig_name, split, n_frames) in wanted.items():
        out = data_dir / key
        fresh = True
        if (out / "manifest.json").is_file():
            m = load_manifest(out)
            fresh = not (m["n_frames"] == n_frames and m["seed"] == profile.data_seed
                         and m["split"] == split)
        if fresh:
            generate_dataset(make_rig(rig_name), profile.scene, n_frames, split,
                             profile.data_seed, out)
        paths[key] = out
    return paths


def _base_spec(datasets, seed, profile, fractions=None) -> StageSpec:
    fractions = fractions or [1.0] * len(datasets)
    return StageSpec(
        stage_kind="base_train",
        datasets=[(str(d), f) for d, f in zip(datasets, fractions)],
        init={"random": seed},
        freeze=FreezeMask(),
        epochs=profile.base_epochs,
        learning_rate=profile.base_lr,
        batch_size=profile.batch_size,
        seed=seed,
    )


def _eval_rows_csv(rows: list[tuple[str, object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EVAL_CSV_HEADER)
    for name, report in rows:
        cells = [name, f"{report.map:.6f}"]
        for cls in CLASS_NAMES:
            ap = report.per_class[cls]["ap"]
            cells.append("" if ap is None else f"{ap:.6f}")
        writer.writerow(cells)
    return buf.getvalue()


def _mean_csv(per_seed_rows: list[list[tuple[str, object]]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EVAL_CSV_HEADER)
    n_rows = len(per_seed_rows[0])
    for i in range(n_rows):
        name = per_seed_rows[0][i][0]
        reports = [rows[i][1] for rows in per_seed_rows]
        cells = [name, f"{sum(r.map for r in reports) / len(reports):.6f}"]
        for cls in CLASS_NAMES:
            aps = [r.per_class[cls]["ap"] for r in reports]
            aps = [a for a in aps if a is not None]
            cells.append(f"{sum(aps) / len(aps):.6f}" if aps else "")
        writer.writerow(cells)
    return buf.getvalue()


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_diff_artifacts(out: Path, named_ckpts: list[tuple[str, Path]]) -> None:
    loaded = [(name, load_checkpoint(p)[0]) for name, p in named_ckpts]
    counts = count_params(loaded[0][1])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["module", "n_params"])
    for module in ("Encoder", "Backbone", "Neck", "Head"):
        writer.writerow([module, counts[module]])
    (out / "param_counts.csv").write_text(buf.getvalue())
    if len(loaded) >= 2:
        (out / "ckpt_diff_abs.csv").write_text(pairwise_report(loaded, is_relative=False))
        (out / "ckpt_diff_rel.csv").write_text(pairwise_report(loaded, is_relative=True))


def _run_seed(name: str, seed: int, out: Path, data: dict, profile: RecipeProfile):
    """One seed of one recipe; returns (rows, named checkpoints)."""
    cfg = profile.detector
    taxi, bus = data["taxi_train"], data["bus_train"]
    taxi_test, bus_test = data["taxi_test"], data["bus_test"]
    out.mkdir(parents=True, exist_ok=True)
    ckpts: list[tuple[str, Path]] = []

    def base(stage_name: str, datasets, fractions=None) -> Path:
        ckpt = out / f"{stage_name}.ckpt"
        train_stage(_base_spec(datasets, seed, profile, fractions), ckpt,
                    cfg=cfg, log_path=out / f"{stage_name}.log.jsonl")
        ckpts.append((stage_name, ckpt))
        return ckpt

    def joint_base(target) -> Path:
        """Joint training: full source data, fractional target data."""
        source = bus if target is taxi else taxi
        return base("joint", [source, target],
                    [1.0, profile.joint_target_fraction])

    def ft(stage_name: str, init: Path, dataset, mask=DEFAULT_FT_MASK,
           epochs=None, fraction=1.0) -> Path:
        ckpt = out / f"{stage_name}.ckpt"
        spec = StageSpec(
            stage_kind="finetune",
            datasets=[(str(dataset), fraction)],
            init={"checkpoint": str(init)},
            freeze=mask,
            epochs=profile.ft_epochs if epochs is None else epochs,
            learning_rate=profile.ft_lr,
            batch_size=profile.batch_size,
            seed=seed,
        )
        train_stage(spec, ckpt, log_path=out / f"{stage_name}.log.jsonl")
        ckpts.append((stage_name, ckpt))
        return ckpt

    all_mask = FreezeMask()
    rows: list[tuple[str, object]] = []

    if name in ("table2a", "table2b"):
        own_train = taxi if name == "table2a" else bus
        own_test = taxi_test if name == "table2a" else bus_test
        single = base("single", [own_train])
        joint = joint_base(own_train)
        tuned = ft("joint_ft", joint, own_train)
        rows = [("single", evaluate_checkpoint(single, own_test)),
                ("joint", evaluate_checkpoint(joint, own_test)),
                ("joint_ft", evaluate_checkpoint(tuned, own_test))]
    elif name in ("table3a", "table3b"):
        own_train = taxi if name == "table3a" else bus
        own_test = taxi_test if name == "table3a" else bus_test
        joint = joint_base(own_train)
        csv_text, grid_ckpts = ablation_grid(
            joint, own_train, own_test, out / "grid", masks=TABLE3_MASKS,
            epochs=profile.ft_epochs, lr=profile.ft_lr,
            batch_size=profile.batch_size, seed=seed)
        (out / "ablation.csv").write_text(csv_text)
        for mask in TABLE3_MASKS:
            label = mask_label(mask)
            rows.append((label, evaluate_checkpoint(grid_ckpts[label], own_test)))
            ckpts.append((f"ft_{label}", grid_ckpts[label]))
    elif name == "table4":
        source = base("taxi_only", [taxi])
        rows.append(("taxi_only", evaluate_checkpoint(source, bus_test)))
        for frac in (0.1, 0.2, 0.5, 1.0):
            tuned = ft(f"ft_frac{int(frac * 100)}", source, bus,
                       fraction=frac)
            rows.append((f"ft_frac{int(frac * 100)}",
                         evaluate_checkpoint(tuned, bus_test)))
        joint = joint_base(bus)
        rows.append(("joint", evaluate_checkpoint(joint, bus_test)))
        full = ft("joint_ft_full", joint, bus, mask=all_mask)
        rows.append(("joint_ft_full", evaluate_checkpoint(full, bus_test)))
        partial = ft("joint_ft_partial", joint, bus)
        rows.append(("joint_ft_partial", evaluate_checkpoint(partial, bus_test)))
    elif name == "table5":
        source = base("taxi_only", [taxi])
        rows.append(("taxi_only", evaluate_checkpoint(source, bus_test)))
        joint = joint_base(bus)
        rows.append(("joint", evaluate_checkpoint(joint, bus_test)))
        teacher_ckpt = out / "teacher.ckpt"
        train_stage(_base_spec([taxi], seed, profile), teacher_ckpt,
                    cfg=make_teacher(profile.detector),
                    log_path=out / "teacher.log.jsonl")
        ckpts.append(("teacher", teacher_ckpt))
        pseudo = generate_pseudo_labels(teacher_ckpt, bus, out / "pseudo_bus",
                                        threshold=DEFAULT_PSEUDO_THRESHOLD)
        for label, mask in (("uda_full", all_mask),
                            ("uda_partial", DEFAULT_FT_MASK)):
            ckpt = out / f"{label}.ckpt"
            uda_finetune(source, pseudo, ckpt, freeze=mask,
                         epochs=profile.ft_epochs, lr=profile.ft_lr,
                         batch_size=profile.batch_size, seed=seed)
            ckpts.append((label, ckpt))
            rows.append((label, evaluate_checkpoint(ckpt, bus_test)))
    else:
        raise ValueError(f"unknown recipe {name!r}; expected one of {RECIPE_NAMES}")

    (out / "eval.csv").write_text(_eval_rows_csv(rows))
    _write_diff_artifacts(out, ckpts)
    return rows, ckpts


def run_recipe(name: str, seeds: list[int], out_dir, profile: RecipeProfile | None = None) -> Path:
    """Run a named recipe across seeds; returns the recipe output directory."""
    profile = profile or RecipeProfile()
    out = Path(out_dir) / name
    out.mkdir(parents=True, exist_ok=True)
    data = ensure_datasets(Path(out_dir) / "data", profile)

    per_seed_rows = []
    provenance = {"recipe": name, "seeds": seeds, "profile": profile.to_json(),
                  "datasets": {k: {"path": str(v), "sha256_manifest": _sha256(v / "manifest.json")}
                               for k, v in data.items()},
                  "checkpoints": {}}
    for seed in seeds:
        rows, ckpts = _run_seed(name, seed, out / f"seed{seed}", data, profile)
        per_seed_rows.append(rows)
        provenance["checkpoints"][str(seed)] = {
            stage: {"path": str(path), "sha256": _sha256(path)}
            for stage, path in ckpts}
    (out / "mean.csv").write_text(_mean_csv(per_seed_rows))
    (out / "provenance.json").write_text(
        json.dumps(provenance, indent=1, sort_keys=True) + "\n")
    return out
