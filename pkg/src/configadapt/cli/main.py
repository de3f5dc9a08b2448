"""Command-line entry points."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from ..errors import ConfigAdaptError


def _default_seed() -> int:
    return int(os.environ.get("CONFIGADAPT_SEED", "0"))


def _cmd_gen_data(args) -> int:
    from ..simworld.dataset import generate_dataset
    from ..simworld.rigs import make_rig
    from ..simworld.types import SceneSpec

    rig = make_rig(args.rig)
    generate_dataset(rig, SceneSpec(), args.frames, args.split, args.seed, args.out)
    print(f"wrote {args.frames} {args.split} frames for {rig.name} to {args.out}")
    return 0


def _parse_datasets(args):
    fractions = [float(f) for f in args.fractions.split(",")] if args.fractions else []
    datasets = []
    for i, path in enumerate(args.datasets.split(",")):
        frac = fractions[i] if i < len(fractions) else 1.0
        datasets.append((path, frac))
    return datasets


def _cmd_train(args, kind: str) -> int:
    from ..detector.config import DetectorConfig
    from ..numcore.optim import FreezeMask
    from ..pipelines.stages import StageSpec, train_stage

    if args.plan:
        from ..pipelines.plan import ExperimentPlan, run_plan
        plan = ExperimentPlan.load(args.plan)
        cfg = DetectorConfig.from_dict(json.loads(Path(args.config).read_text())) \
            if args.config else DetectorConfig()
        outputs = run_plan(plan, args.out, cfg=cfg)
        for name, path in outputs.items():
            print(f"{name}: {path}")
        return 0

    init = {"checkpoint": args.init} if args.init else {"random": args.seed}
    spec = StageSpec(
        stage_kind=kind,
        datasets=_parse_datasets(args),
        init=init,
        freeze=FreezeMask.from_csv(args.train_modules),
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    cfg = None
    if "random" in init:
        from ..detector.config import DetectorConfig
        cfg = DetectorConfig.from_dict(json.loads(Path(args.config).read_text())) \
            if args.config else DetectorConfig()
    log = train_stage(spec, args.out, cfg=cfg,
                      log_path=str(args.out) + ".log.jsonl")
    used = sum(1 for _ in log[:1])
    if log:
        print(f"trained {spec.epochs} epochs over {log[-1]['frames_seen']} frames "
              f"-> {args.out}")
    else:
        print(f"epochs=0; checkpoint copied from init -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    from ..evalkit.report import CSV_HEADER
    from ..pipelines.infer import evaluate_checkpoint

    report = evaluate_checkpoint(args.ckpt, args.dataset)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.with_suffix(".json").write_text(report.to_json() + "\n")
    out.with_suffix(".csv").write_text(CSV_HEADER + "\n" + report.csv_row() + "\n")
    print(f"mAP {report.map:.4f} over {report.n_frames} frames "
          f"({report.n_dets} detections)")
    return 0


def _cmd_recipe(args) -> int:
    from .recipes import RecipeProfile, run_recipe

    seeds = [int(s) for s in args.seeds.split(",")]
    profile = RecipeProfile()
    if args.base_epochs:
        profile.base_epochs = args.base_epochs
    if args.ft_epochs:
        profile.ft_epochs = args.ft_epochs
    out = run_recipe(args.name, seeds, args.out, profile)
    print(f"recipe {args.name} complete: {out}")
    return 0


def _cmd_pseudo_label(args) -> int:
    from ..pipelines.pseudo import generate_pseudo_labels

    out = generate_pseudo_labels(args.teacher, args.dataset, args.out,
                                 threshold=args.threshold)
    print(f"pseudo-labeled dataset at {out}")
    return 0


def _run_ckpt_diff(args) -> int:
    from ..ckptdiff.diff import MODULES, UNCATEGORIZED, PAIRWISE_COLUMNS, count_params, diff
    from .ckptfile import load_checkpoint

    base, _ = load_checkpoint(args.base)
    if args.param_counts:
        counts = count_params(base)
        rows = [f"module,n_params"]
        for module in MODULES:
            rows.append(f"{module},{counts[module]}")
        text = "\n".join(rows) + "\n"
        if args.csv:
            Path(args.csv).write_text(text)
        print(text, end="")
        return 0

    target, _ = load_checkpoint(args.target)
    report = diff(base, target, is_relative=args.relative)
    if args.csv:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=PAIRWISE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in report.rows():
            writer.writerow({"base_name": str(args.base),
                             "target_name": str(args.target), **row})
        Path(args.csv).write_text(buf.getvalue())
    mode = "relative" if args.relative else "absolute"
    print(f"{'module':<14}{'n_params':>10}{'d_diff':>16}{'d_sum':>16}{'d':>16}")
    for row in report.rows():
        print(f"{row['module']:<14}{row['n_params']:>10}"
              f"{row['d_diff']:>16.6g}{row['d_sum']:>16.6g}{row['d']:>16.6g}")
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def _add_train_args(p, kind):
    p.add_argument("--plan", help="experiment plan JSON (overrides other flags)")
    p.add_argument("--init", help="init checkpoint (omit for random init)")
    p.add_argument("--datasets", default="", help="comma-separated dataset dirs")
    p.add_argument("--fractions", default="", help="comma-separated fractions in (0,1]")
    p.add_argument("--train-modules", default="encoder,backbone,neck,head",
                   help="trainable module subset; empty string freezes everything")
    p.add_argument("--epochs", type=int, default=40 if kind == "base_train" else 10)
    p.add_argument("--lr", type=float, default=1e-3 if kind == "base_train" else 1e-4)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--config", help="detector config JSON (random init only)")
    p.add_argument("--out", required=True, help="output checkpoint path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="configadapt",
        description="Sensor-configuration adaptation workbench for LiDAR 3D detection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a simulated dataset")
    p.add_argument("--rig", required=True, choices=["taxisim", "bussim"])
    p.add_argument("--split", required=True, choices=["train", "val", "test"])
    p.add_argument("--frames", type=int, default=512)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train from random init or a plan")
    _add_train_args(p, "base_train")
    p.set_defaults(func=lambda a: _cmd_train(a, "base_train"))

    p = sub.add_parser("finetune", help="fine-tune from a checkpoint")
    _add_train_args(p, "finetune")
    p.set_defaults(func=lambda a: _cmd_train(a, "finetune"))

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="report path stem (.json/.csv)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("pseudo-label", help="write teacher pseudo-labels for a dataset")
    p.add_argument("--teacher", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--threshold", type=float, default=0.3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pseudo_label)

    p = sub.add_parser("recipe", help="run a named table recipe")
    p.add_argument("name", choices=["table2a", "table2b", "table3a", "table3b",
                                    "table4", "table5"])
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--out", required=True)
    p.add_argument("--base-epochs", type=int, default=0, help="override profile")
    p.add_argument("--ft-epochs", type=int, default=0, help="override profile")
    p.set_defaults(func=_cmd_recipe)

    p = sub.add_parser("ckpt-diff", help="layer-wise parameter drift between checkpoints")
    _add_ckpt_diff_args(p)
    p.set_defaults(func=_run_ckpt_diff)
    return parser


def _add_ckpt_diff_args(p):
    p.add_argument("--base", required=True)
    p.add_argument("--target")
    p.add_argument("--relative", action="store_true")
    p.add_argument("--csv")
    p.add_argument("--param-counts", action="store_true",
                   help="emit per-module parameter counts for --base instead of a diff")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigAdaptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def ckpt_diff_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ckpt-diff",
        description="Layer-wise L1 parameter drift between two checkpoints")
    _add_ckpt_diff_args(parser)
    args = parser.parse_args(argv)
    try:
        return _run_ckpt_diff(args)
    except ConfigAdaptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
