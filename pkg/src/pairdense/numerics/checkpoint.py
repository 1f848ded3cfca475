"""Binary checkpoint: magic, manifest length, JSON manifest, raw little-endian blobs."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"PDCKPT01"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, arrays: dict, meta: dict | None = None):
    blobs = []
    entries = []
    offset = 0
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])
        dt = arr.dtype.newbyteorder("<")
        raw = np.ascontiguousarray(arr, dtype=dt).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": dt.str,
                        "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    manifest = json.dumps({"params": entries, "total_bytes": offset, "meta": meta or {}},
                          sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(manifest)))
        fh.write(manifest)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path):
    """Return ``(arrays, meta)``; raises :class:`CheckpointError` on any inconsistency."""
    raw = Path(path).read_bytes()
    head = len(MAGIC) + 8
    if len(raw) < head or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (mlen,) = struct.unpack("<Q", raw[len(MAGIC):head])
    try:
        manifest = json.loads(raw[head:head + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt manifest ({exc})") from None
    body = raw[head + mlen:]
    if len(body) != manifest["total_bytes"]:
        raise CheckpointError(
            f"{path}: blob section is {len(body)} bytes, manifest declares {manifest['total_bytes']}")
    arrays = {}
    for e in manifest["params"]:
        dt = np.dtype(e["dtype"])
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        if count * dt.itemsize != e["nbytes"] or e["offset"] + e["nbytes"] > len(body):
            raise CheckpointError(f"{path}: entry {e['name']} has inconsistent size")
        arr = np.frombuffer(body, dtype=dt, count=count, offset=e["offset"])
        arrays[e["name"]] = arr.reshape(e["shape"]).astype(dt.newbyteorder("="))
    return arrays, manifest.get("meta", {})
