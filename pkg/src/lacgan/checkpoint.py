"""Versioned binary checkpoint container.

Layout::

    b"LACGANCK"                 8-byte magic
    uint32 LE                   format version
    uint64 LE                   header length in bytes
    header                      UTF-8 JSON (sorted keys): kind, method, epoch,
                                config, meta, and the array index
    payload                     named arrays, 64-bit little-endian floats,
                                concatenated in index order
    32 bytes                    SHA-256 of everything above
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError

MAGIC = b"LACGANCK"
FORMAT_VERSION = 1
_DIGEST = 32


@dataclass
class Checkpoint:
    kind: str  # "train" (resumable state) or "best" (selected model only)
    method: str
    epoch: int
    config: dict
    arrays: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def section(self, prefix: str) -> dict[str, np.ndarray]:
        """Arrays under ``prefix/`` with the prefix stripped."""
        p = prefix.rstrip("/") + "/"
        return {k[len(p) :]: v for k, v in self.arrays.items() if k.startswith(p)}


def to_bytes(ckpt: Checkpoint) -> bytes:
    index, chunks, offset = [], [], 0
    for name in sorted(ckpt.arrays):
        a = np.ascontiguousarray(ckpt.arrays[name], dtype="<f8")
        index.append({"name": name, "shape": list(a.shape), "offset": offset, "count": int(a.size)})
        chunks.append(a.tobytes())
        offset += a.size
    header = {
        "format_version": FORMAT_VERSION,
        "kind": ckpt.kind,
        "method": ckpt.method,
        "epoch": ckpt.epoch,
        "config": ckpt.config,
        "meta": ckpt.meta,
        "arrays": index,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")
    body = MAGIC + struct.pack("<IQ", FORMAT_VERSION, len(hbytes)) + hbytes + b"".join(chunks)
    return body + hashlib.sha256(body).digest()


def from_bytes(blob: bytes) -> Checkpoint:
    fixed = len(MAGIC) + 12
    if len(blob) < fixed + _DIGEST or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic or truncated)")
    version, hlen = struct.unpack("<IQ", blob[len(MAGIC) : fixed])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version} (expected {FORMAT_VERSION})")
    body, digest = blob[:-_DIGEST], blob[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("checkpoint is corrupt or truncated (digest mismatch)")
    try:
        header = json.loads(body[fixed : fixed + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from None
    payload = np.frombuffer(body[fixed + hlen :], dtype="<f8")
    arrays = {}
    for entry in header["arrays"]:
        start, count = entry["offset"], entry["count"]
        if start + count > payload.size:
            raise CheckpointError(f"array {entry['name']!r} runs past the end of the payload")
        arrays[entry["name"]] = payload[start : start + count].astype(np.float64).reshape(entry["shape"])
    return Checkpoint(header["kind"], header["method"], header["epoch"], header["config"], arrays, header["meta"])


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(ckpt))


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror}") from None
    return from_bytes(blob)
