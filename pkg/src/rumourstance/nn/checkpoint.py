"""Binary checkpoint format.

Layout (little-endian)::

    b"RSCK" | u32 version | u32 len + kind bytes | u32 len + config JSON bytes
    u32 n_params
    per parameter: u32 len + name bytes | u32 rank | u32 dims[rank] | f32 payload
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"RSCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def dumps(kind: str, config: dict, arrays: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION), _pack_str(kind),
             _pack_str(json.dumps(config, sort_keys=True, separators=(",", ":"))),
             struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        parts.append(_pack_str(name))
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def loads(raw: bytes) -> tuple[str, dict, dict[str, np.ndarray]]:
    if raw[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file")
    off = 4

    def u32():
        nonlocal off
        (v,) = struct.unpack_from("<I", raw, off)
        off += 4
        return v

    def string():
        nonlocal off
        n = u32()
        s = raw[off:off + n].decode("utf-8")
        off += n
        return s

    try:
        version = u32()
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        kind = string()
        config = json.loads(string())
        arrays = {}
        for _ in range(u32()):
            name = string()
            dims = tuple(u32() for _ in range(u32()))
            count = int(np.prod(dims, dtype=np.int64))
            arr = np.frombuffer(raw, dtype="<f4", count=count, offset=off).reshape(dims)
            off += 4 * count
            arrays[name] = arr.astype(np.float64)
    except (struct.error, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"corrupt checkpoint: {exc}") from exc
    if off != len(raw):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return kind, config, arrays


def save(path, kind: str, config: dict, arrays: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(kind, config, arrays))


def load(path):
    return loads(Path(path).read_bytes())
