"""Binary checkpoint file: magic + JSON manifest + raw little-endian f32 blob.

Layout:
    bytes 0..5   magic "CKPT1"
    bytes 5..9   version, u32 LE
    bytes 9..17  manifest length in bytes, u64 LE
    manifest     JSON {entries: [{name, dtype, shape, byte_offset, byte_len}],
                       metadata: {...}}
    blob         concatenated row-major f32 data, offsets relative to blob start

Save/load round-trips are byte-identical.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointMissing

MAGIC = b"CKPT1"
VERSION = 1


def save_checkpoint(path, params: dict[str, np.ndarray], metadata: dict | None = None) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, arr in params.items():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({
            "name": name,
            "dtype": "f32",
            "shape": list(np.asarray(arr).shape),
            "byte_offset": offset,
            "byte_len": len(data),
        })
        blobs.append(data)
        offset += len(data)
    manifest = json.dumps({"entries": entries, "metadata": metadata or {}},
                          sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(manifest)))
        fh.write(manifest)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointMissing(f"no checkpoint at {path}")
    raw = path.read_bytes()
    if raw[:5] != MAGIC:
        raise CheckpointMissing(f"{path} is not a checkpoint file")
    version, = struct.unpack("<I", raw[5:9])
    if version != VERSION:
        raise CheckpointMissing(f"{path}: unsupported version {version}")
    mlen, = struct.unpack("<Q", raw[9:17])
    manifest = json.loads(raw[17:17 + mlen].decode())
    blob = raw[17 + mlen:]
    params = {}
    last_end = 0
    for entry in manifest["entries"]:
        start = entry["byte_offset"]
        if start < last_end:
            raise CheckpointMissing(f"{path}: overlapping tensor offsets")
        end = start + entry["byte_len"]
        arr = np.frombuffer(blob[start:end], dtype="<f4").reshape(entry["shape"])
        params[entry["name"]] = arr.copy()
        last_end = end
    return params, manifest["metadata"]
