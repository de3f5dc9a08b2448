"""Experiment plans: named stage chains with checkpoint handoff."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..detector.config import DetectorConfig
from .stages import StageSpec, train_stage


@dataclass
class ExperimentPlan:
    """Linear chain of named stages. An init of {"checkpoint": "@name"} refers
    to the output of an earlier stage in the same plan."""

    name: str
    stages: list[tuple[str, StageSpec]]

    def __post_init__(self):
        seen = set()
        for stage_name, spec in self.stages:
            if stage_name in seen:
                raise ValueError(f"duplicate stage name {stage_name!r}")
            ref = spec.init.get("checkpoint", "")
            if isinstance(ref, str) and ref.startswith("@") and ref[1:] not in seen:
                raise ValueError(f"stage {stage_name!r} references {ref} "
                                 "which is not an earlier stage")
            seen.add(stage_name)

    def to_json(self) -> dict:
        return {"name": self.name,
                "stages": [{"name": n, **s.to_json()} for n, s in self.stages]}

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentPlan":
        stages = []
        for entry in obj["stages"]:
            entry = dict(entry)
            name = entry.pop("name")
            stages.append((name, StageSpec.from_json(entry)))
        return cls(name=obj["name"], stages=stages)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        return cls.from_json(json.loads(Path(path).read_text()))


def run_plan(plan: ExperimentPlan, workdir, cfg: DetectorConfig | None = None) -> dict:
    """Execute all stages in order; returns stage name -> checkpoint path."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, Path] = {}
    for stage_name, spec in plan.stages:
        init = dict(spec.init)
        ref = init.get("checkpoint", "")
        if isinstance(ref, str) and ref.startswith("@"):
            init["checkpoint"] = str(outputs[ref[1:]])
            spec = StageSpec(**{**spec.to_json(), "init": init,
                                "datasets": spec.datasets, "freeze": spec.freeze})
        ckpt = workdir / f"{stage_name}.ckpt"
        log = workdir / f"{stage_name}.log.jsonl"
        train_stage(spec, ckpt, cfg=cfg, log_path=log)
        outputs[stage_name] = ckpt
    return outputs
