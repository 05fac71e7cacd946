"""Portable binary checkpoints.

Layout (all integers little-endian)::

    b"ICTN" | u8 version=1 | repeated, sorted by name:
        u32 name_len | name (UTF-8) | u8 rank | rank x u32 extents | prod(extents) x f64
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import CheckpointError
from .wavio import atomic_write_bytes

MAGIC = b"ICTN"
VERSION = 1


def dumps(params: Mapping[str, np.ndarray]) -> bytes:
    parts = [MAGIC, bytes([VERSION])]
    for name in sorted(params):
        arr = np.asarray(params[name], dtype="<f8")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


def loads(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:4] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic bytes)")
    if len(blob) < 5 or blob[4] != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {blob[4] if len(blob) > 4 else None}")
    pos = 5
    out: dict[str, np.ndarray] = {}
    try:
        while pos < len(blob):
            (n,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos:pos + n].decode("utf-8")
            pos += n
            rank = blob[pos]
            pos += 1
            shape = struct.unpack_from(f"<{rank}I", blob, pos)
            pos += 4 * rank
            count = int(np.prod(shape, dtype=np.int64))
            if pos + 8 * count > len(blob):
                raise CheckpointError(f"parameter {name!r} truncated")
            out[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).reshape(shape).copy()
            pos += 8 * count
    except (struct.error, IndexError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint: {exc}") from exc
    return out


def save_checkpoint(path: str | Path, params: Mapping[str, np.ndarray]) -> None:
    atomic_write_bytes(path, dumps(params))


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    return loads(Path(path).read_bytes())


def load_into(model, path: str | Path) -> None:
    """Load a checkpoint into ``model``, raising CheckpointError on any name/shape mismatch."""
    state = load_checkpoint(path)
    try:
        model.load_state_dict(state)
    except ValueError as exc:
        raise CheckpointError(str(exc)) from exc
