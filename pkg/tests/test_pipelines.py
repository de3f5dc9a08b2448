import json
import math

import numpy as np
import pytest

from configadapt.cli.ckptfile import load_checkpoint, save_checkpoint
from configadapt.detector.config import make_teacher
from configadapt.errors import CheckpointMissing, DatasetMissing
from configadapt.numcore.optim import FreezeMask, module_of
from configadapt.pipelines.ablation import ALL_MASKS, TABLE3_MASKS, mask_label
from configadapt.pipelines.infer import evaluate_checkpoint, load_model, predict_dataset
from configadapt.pipelines.plan import ExperimentPlan, run_plan
from configadapt.pipelines.pseudo import generate_pseudo_labels, uda_finetune
from configadapt.pipelines.stages import (DEFAULT_FT_MASK, StageSpec,
                                          downstream_finetune, subsample_indices,
                                          train_stage)
from configadapt.simworld.dataset import load_manifest

from conftest import tiny_detector


def base_spec(datasets, epochs=2, seed=0, fractions=None, **kw):
    fractions = fractions or [1.0] * len(datasets)
    return StageSpec(
        stage_kind="base_train",
        datasets=[(str(d), f) for d, f in zip(datasets, fractions)],
        init={"random": seed},
        epochs=epochs,
        learning_rate=1e-3,
        batch_size=4,
        seed=seed,
        **kw,
    )


# ------------------------------------------------------------------ stage spec

def test_stage_spec_json_roundtrip(tiny_data):
    spec = base_spec([tiny_data["taxi"]], freeze=FreezeMask(frozenset({"neck"})))
    clone = StageSpec.from_json(spec.to_json())
    assert clone.to_json() == spec.to_json()
    assert clone.freeze.trainable == frozenset({"neck"})
    assert set(spec.to_json()) == {"stage_kind", "datasets", "init", "freeze",
                                   "epochs", "learning_rate", "batch_size", "seed"}


def test_stage_spec_validation(tiny_data):
    with pytest.raises(ValueError):
        StageSpec(stage_kind="warmup", datasets=[], init={"random": 0})
    with pytest.raises(ValueError):
        base_spec([tiny_data["taxi"]], fractions=[0.0])
    with pytest.raises(ValueError):
        base_spec([tiny_data["taxi"]], fractions=[1.5])
    with pytest.raises(ValueError):
        StageSpec(stage_kind="finetune", datasets=[], init={"random": 0})


def test_subsample_fractions_are_nested():
    for seed in (0, 1, 99):
        full = subsample_indices(100, 1.0, seed)
        assert sorted(full) == list(range(100))
        prev = []
        for frac in (0.1, 0.2, 0.5, 1.0):
            got = list(subsample_indices(100, frac, seed))
            assert len(got) == math.ceil(frac * 100)
            assert got[:len(prev)] == prev
            prev = got


def test_subsample_rounds_up():
    assert len(subsample_indices(10, 0.01, 0)) == 1
    assert len(subsample_indices(7, 0.5, 0)) == 4


# -------------------------------------------------------------------- training

def test_zero_epochs_preserves_random_init(tiny_data, tiny_cfg, tmp_path):
    from configadapt.detector.model import Detector
    spec = base_spec([tiny_data["taxi"]], epochs=0, seed=5)
    log = train_stage(spec, tmp_path / "out.ckpt", cfg=tiny_cfg)
    assert log == []
    params, meta = load_checkpoint(tmp_path / "out.ckpt")
    fresh = Detector(tiny_cfg, seed=5).state_dict()
    assert set(params) == set(fresh)
    for name in params:
        np.testing.assert_array_equal(params[name], fresh[name])
    assert meta["detector"] == tiny_cfg.to_dict()
    assert meta["stage"]["stage_kind"] == "base_train"


def test_empty_freeze_mask_changes_nothing(tiny_data, tiny_cfg, tmp_path):
    spec = base_spec([tiny_data["taxi"]], epochs=2,
                     freeze=FreezeMask(frozenset()))
    log = train_stage(spec, tmp_path / "frozen.ckpt", cfg=tiny_cfg)
    assert all(entry["mean_loss"] is None for entry in log)
    params, _ = load_checkpoint(tmp_path / "frozen.ckpt")
    ref_spec = base_spec([tiny_data["taxi"]], epochs=0)
    train_stage(ref_spec, tmp_path / "init.ckpt", cfg=tiny_cfg)
    init, _ = load_checkpoint(tmp_path / "init.ckpt")
    for name in params:
        np.testing.assert_array_equal(params[name], init[name])


def test_training_log_schema_and_frame_accounting(tiny_data, tiny_cfg, tmp_path):
    spec = base_spec([tiny_data["taxi"], tiny_data["bus"]], epochs=2)
    log = train_stage(spec, tmp_path / "joint.ckpt", cfg=tiny_cfg,
                      log_path=tmp_path / "joint.log.jsonl")
    assert [e["epoch"] for e in log] == [0, 1]
    for entry in log:
        assert set(entry) == {"epoch", "mean_loss", "frames_seen",
                              "per_dataset_batch_counts"}
        assert entry["frames_seen"] == 6 + 4
        assert np.isfinite(entry["mean_loss"])
        assert set(entry["per_dataset_batch_counts"]) == \
            {str(tiny_data["taxi"]), str(tiny_data["bus"])}
    lines = (tmp_path / "joint.log.jsonl").read_text().splitlines()
    assert [json.loads(line) for line in lines] == log


def test_fraction_reduces_frames_seen(tiny_data, tiny_cfg, tmp_path):
    spec = base_spec([tiny_data["taxi"]], epochs=1, fractions=[0.5])
    log = train_stage(spec, tmp_path / "half.ckpt", cfg=tiny_cfg)
    assert log[0]["frames_seen"] == 3  # ceil(0.5 * 6)


def test_training_is_bit_deterministic(tiny_data, tiny_cfg, tmp_path):
    spec = base_spec([tiny_data["taxi"]], epochs=2, seed=3)
    train_stage(spec, tmp_path / "a.ckpt", cfg=tiny_cfg)
    train_stage(spec, tmp_path / "b.ckpt", cfg=tiny_cfg)
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_finetune_freeze_conservation(tiny_data, tiny_cfg, tmp_path):
    base = tmp_path / "base.ckpt"
    train_stage(base_spec([tiny_data["taxi"]], epochs=1), base, cfg=tiny_cfg)
    tuned = tmp_path / "tuned.ckpt"
    downstream_finetune(base, tiny_data["bus"], tuned, epochs=2, seed=0)
    before, _ = load_checkpoint(base)
    after, meta = load_checkpoint(tuned)
    assert meta["stage"]["freeze"] == ["backbone", "neck"]
    changed = set()
    for name in before:
        if not np.array_equal(before[name], after[name]):
            changed.add(module_of(name))
        if module_of(name) in ("encoder", "head"):
            assert before[name].tobytes() == after[name].tobytes(), name
    assert changed == {"backbone", "neck"}


def test_missing_dataset_and_checkpoint_errors(tiny_cfg, tmp_path):
    spec = base_spec([tmp_path / "nope"], epochs=1)
    with pytest.raises(DatasetMissing):
        train_stage(spec, tmp_path / "x.ckpt", cfg=tiny_cfg)
    with pytest.raises(CheckpointMissing):
        load_model(tmp_path / "missing.ckpt")


def test_checkpoint_without_config_metadata_rejected(tiny_cfg, tmp_path):
    save_checkpoint(tmp_path / "bare.ckpt", {"head.b": np.zeros(2, np.float32)})
    with pytest.raises(CheckpointMissing):
        load_model(tmp_path / "bare.ckpt")


# ------------------------------------------------------------------- inference

@pytest.fixture(scope="module")
def trained(tiny_data, tmp_path_factory):
    root = tmp_path_factory.mktemp("trained")
    ckpt = root / "base.ckpt"
    train_stage(base_spec([tiny_data["taxi"]], epochs=3), ckpt, cfg=tiny_detector())
    return ckpt


def test_predict_and_evaluate_checkpoint(tiny_data, trained):
    model, cfg = load_model(trained)
    dets = predict_dataset(model, cfg, tiny_data["taxi"])
    assert set(dets) == set(range(6))
    for items in dets.values():
        assert all(d.score >= cfg.score_threshold for d in items)
        assert len(items) <= cfg.top_k
    report = evaluate_checkpoint(trained, tiny_data["taxi"])
    assert 0.0 <= report.map <= 1.0
    assert report.n_frames == 6


# --------------------------------------------------------------- pseudo labels

def test_pseudo_labels_threshold_and_content(tiny_data, trained, tmp_path):
    src = tiny_data["bus"]
    out = generate_pseudo_labels(trained, src, tmp_path / "pseudo", threshold=0.0)
    manifest = load_manifest(out)
    assert manifest["pseudo_labels"]["threshold"] == 0.0
    assert manifest["n_frames"] == 4
    model, cfg = load_model(trained)
    dets = predict_dataset(model, cfg, src)
    for fid in range(4):
        assert (out / f"{fid:06d}.pts").read_bytes() == \
            (src / f"{fid:06d}.pts").read_bytes()
        boxes = json.loads((out / f"{fid:06d}.json").read_text())
        assert len(boxes) == len(dets[fid])
    strict = generate_pseudo_labels(trained, src, tmp_path / "strict", threshold=1.1)
    for fid in range(4):
        assert json.loads((strict / f"{fid:06d}.json").read_text()) == []


def test_uda_finetune_runs_and_respects_mask(tiny_data, trained, tmp_path):
    pseudo = generate_pseudo_labels(trained, tiny_data["bus"], tmp_path / "p",
                                    threshold=0.3)
    out = tmp_path / "uda.ckpt"
    log = uda_finetune(trained, pseudo, out, freeze=DEFAULT_FT_MASK,
                       epochs=1, seed=0)
    assert np.isfinite(log[0]["mean_loss"])
    before, _ = load_checkpoint(trained)
    after, meta = load_checkpoint(out)
    assert meta["stage"]["stage_kind"] == "pseudo_label_finetune"
    for name in before:
        if module_of(name) in ("encoder", "head"):
            assert before[name].tobytes() == after[name].tobytes()


def test_teacher_checkpoint_carries_its_own_config(tiny_data, tmp_path):
    cfg = make_teacher(tiny_detector())
    ckpt = tmp_path / "teacher.ckpt"
    train_stage(base_spec([tiny_data["taxi"]], epochs=1), ckpt, cfg=cfg)
    model, loaded_cfg = load_model(ckpt)
    assert loaded_cfg == cfg
    assert loaded_cfg.grid == tiny_detector().grid * 2


# ----------------------------------------------------------------------- plans

def test_plan_validates_stage_references(tiny_data):
    spec_a = base_spec([tiny_data["taxi"]], epochs=1)
    spec_b = StageSpec(stage_kind="finetune",
                       datasets=[(str(tiny_data["bus"]), 1.0)],
                       init={"checkpoint": "@missing"}, epochs=1,
                       learning_rate=1e-4, batch_size=4, seed=0)
    with pytest.raises(ValueError):
        ExperimentPlan(name="bad", stages=[("a", spec_a), ("b", spec_b)])
    with pytest.raises(ValueError):
        ExperimentPlan(name="dup", stages=[("a", spec_a), ("a", spec_a)])


def test_run_plan_chains_checkpoints(tiny_data, tiny_cfg, tmp_path):
    spec_a = base_spec([tiny_data["taxi"]], epochs=1)
    spec_b = StageSpec(stage_kind="finetune",
                       datasets=[(str(tiny_data["bus"]), 1.0)],
                       init={"checkpoint": "@base"},
                       freeze=DEFAULT_FT_MASK, epochs=1,
                       learning_rate=1e-4, batch_size=4, seed=0)
    plan = ExperimentPlan(name="chain", stages=[("base", spec_a), ("ft", spec_b)])
    plan.save(tmp_path / "plan.json")
    loaded = ExperimentPlan.load(tmp_path / "plan.json")
    outputs = run_plan(loaded, tmp_path / "work", cfg=tiny_cfg)
    assert set(outputs) == {"base", "ft"}
    _, meta = load_checkpoint(outputs["ft"])
    assert meta["stage"]["init"]["checkpoint"] == str(outputs["base"])


# -------------------------------------------------------------------- ablation

def test_mask_catalogues():
    assert len(ALL_MASKS) == 16
    assert len(set(ALL_MASKS)) == 16
    assert len(TABLE3_MASKS) == 8
    assert mask_label(frozenset()) == "none"
    assert mask_label(frozenset({"neck", "backbone"})) == "backbone+neck"
    assert mask_label(frozenset({"encoder", "backbone", "neck", "head"})) == \
        "encoder+backbone+neck+head"


# ----------------------------------------------------------- checkpoint format

def test_checkpoint_roundtrip_and_metadata(tmp_path, rng):
    params = {"encoder.w": rng.standard_normal((3, 4)).astype(np.float32),
              "head.b": rng.standard_normal(5).astype(np.float32)}
    meta = {"detector": tiny_detector().to_dict(), "note": "x"}
    path = tmp_path / "c.ckpt"
    save_checkpoint(path, params, meta)
    loaded, loaded_meta = load_checkpoint(path)
    assert loaded_meta == meta
    assert list(loaded) == list(params)
    for name in params:
        np.testing.assert_array_equal(loaded[name], params[name])
    save_checkpoint(tmp_path / "c2.ckpt", loaded, loaded_meta)
    assert path.read_bytes() == (tmp_path / "c2.ckpt").read_bytes()


def test_checkpoint_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"NOTACKPT" + b"\x00" * 32)
    with pytest.raises(CheckpointMissing):
        load_checkpoint(bad)
