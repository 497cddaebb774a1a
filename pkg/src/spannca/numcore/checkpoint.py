"""Checkpoint container.

Layout::

    MAGIC (8 bytes) | header length (uint64 LE) | JSON header | raw data

The JSON header lists each parameter's name, shape and byte offset into the
data block, which holds little-endian float64 values.  It also carries a
digest of the model-defining config plus arbitrary JSON metadata.  Writing
is deterministic: identical inputs give identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from ..errors import DigestMismatch

MAGIC = b"SPNCKPT1"


def config_digest(config) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def save_checkpoint(path, arrays: dict, digest: str, meta=None) -> None:
    entries, chunks, offset = [], [], 0
    for name in sorted(arrays):
        data = np.ascontiguousarray(arrays[name], dtype="<f8")
        raw = data.tobytes()
        entries.append({"name": name, "shape": list(data.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"digest": digest, "params": entries, "meta": meta or {}},
        sort_keys=True,
        separators=(",", ":"),
    ).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for raw in chunks:
            f.write(raw)


def read_checkpoint(path, expected_digest: str | None = None):
    """Return ``(arrays, digest, meta)``; raise DigestMismatch on a wrong digest."""
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen))
        data = f.read()
    if expected_digest is not None and header["digest"] != expected_digest:
        raise DigestMismatch(
            f"{path}: config digest {header['digest'][:12]} != expected {expected_digest[:12]}"
        )
    arrays = {}
    for e in header["params"]:
        buf = data[e["offset"] : e["offset"] + e["nbytes"]]
        arrays[e["name"]] = np.frombuffer(buf, dtype="<f8").reshape(e["shape"]).astype(np.float64)
    return arrays, header["digest"], header["meta"]
