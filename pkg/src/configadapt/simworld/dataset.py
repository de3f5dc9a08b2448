"""Dataset directory format and generation.

Layout:
    manifest.json   {rig, split, n_frames, seed, class_names, frames: [...]}
    NNNNNN.pts      little-endian float32 records (x, y, z, intensity) * N
    NNNNNN.json     [{center: [x,y,z], size: [l,w,h], yaw, class}, ...]

Per-frame seeds are derived from (seed, split, frame_id) with a stable hash so
any frame can be regenerated independently and generation parallelizes.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from ..errors import DatasetMissing, IoFailure
from .raycast import raycast
from .scene import sample_scene
from .types import CLASS_NAMES, Box3D, Frame, ObjectClass, SceneSpec, SensorRig

SPLITS = ("train", "val", "test")


def stable_hash(seed: int, split: str, frame_id: int) -> int:
    """Platform-independent 64-bit seed for one frame."""
    digest = hashlib.sha256(f"{seed}:{split}:{frame_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _box_to_json(box: Box3D) -> dict:
    return {
        "center": [float(v) for v in box.center],
        "size": [float(v) for v in box.size],
        "yaw": float(box.yaw),
        "class": box.cls.name,
    }


def _box_from_json(obj: dict) -> Box3D:
    return Box3D(
        center=tuple(obj["center"]),
        size=tuple(obj["size"]),
        yaw=obj["yaw"],
        cls=ObjectClass[obj["class"]],
    )


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def make_frame(rig: SensorRig, spec: SceneSpec, frame_id: int, frame_seed: int) -> Frame:
    boxes = sample_scene(spec, frame_seed)
    points = raycast(rig, boxes, frame_seed + 1)
    return Frame(frame_id=frame_id, rig=rig.name, points=points, boxes=tuple(boxes))


def generate_dataset(rig: SensorRig, spec: SceneSpec, n_frames: int, split: str,
                     seed: int, out_dir: str | os.PathLike) -> Path:
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        frame_files = []
        for frame_id in range(n_frames):
            frame = make_frame(rig, spec, frame_id, stable_hash(seed, split, frame_id))
            stem = f"{frame_id:06d}"
            (out / f"{stem}.pts").write_bytes(
                np.ascontiguousarray(frame.points, dtype="<f4").tobytes())
            _dump_json(out / f"{stem}.json", [_box_to_json(b) for b in frame.boxes])
            frame_files.append(stem + ".pts")
        _dump_json(out / "manifest.json", {
            "rig": rig.name,
            "split": split,
            "n_frames": n_frames,
            "seed": seed,
            "class_names": CLASS_NAMES,
            "frames": frame_files,
        })
    except OSError as exc:
        raise IoFailure(f"failed writing dataset to {out}: {exc}") from exc
    return out


def load_manifest(dataset_dir: str | os.PathLike) -> dict:
    path = Path(dataset_dir) / "manifest.json"
    if not path.is_file():
        raise DatasetMissing(f"no manifest at {path}")
    return json.loads(path.read_text())


def load_frame(dataset_dir: str | os.PathLike, frame_id: int) -> Frame:
    root = Path(dataset_dir)
    manifest = load_manifest(root)
    stem = f"{frame_id:06d}"
    pts_path = root / f"{stem}.pts"
    box_path = root / f"{stem}.json"
    if not pts_path.is_file() or not box_path.is_file():
        raise DatasetMissing(f"frame {frame_id} missing from {root}")
    points = np.frombuffer(pts_path.read_bytes(), dtype="<f4").reshape(-1, 4)
    boxes = tuple(_box_from_json(o) for o in json.loads(box_path.read_text()))
    return Frame(frame_id=frame_id, rig=manifest["rig"], points=points, boxes=boxes)


def load_all_frames(dataset_dir: str | os.PathLike) -> list[Frame]:
    manifest = load_manifest(dataset_dir)
    return [load_frame(dataset_dir, i) for i in range(manifest["n_frames"])]
