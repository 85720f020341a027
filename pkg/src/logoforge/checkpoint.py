"""Binary tensor container plus a JSON sidecar for model config.

Layout: magic "LGFCKPT1", u32 tensor count, then per tensor
{u16 name length, utf-8 name, u8 rank, u32 dims[], raw little-endian f32 data}.
The sidecar lives at <path>.meta.json and holds the human-readable config.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .autodiff.tensor import Tensor

MAGIC = b"LGFCKPT1"


class CheckpointError(ValueError):
    pass


def sidecar_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def save_checkpoint(path, tensors: dict, meta: dict | None = None) -> None:
    """Write named tensors (Tensor or ndarray values) and optional metadata."""
    path = Path(path)
    items = []
    for name in sorted(tensors):
        val = tensors[name]
        arr = val.data if isinstance(val, Tensor) else np.asarray(val)
        arr = np.ascontiguousarray(arr, dtype="<f4")
        items.append((name, arr))
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(items)))
        for name, arr in items:
            nb = name.encode("utf-8")
            if len(nb) > 0xFFFF:
                raise CheckpointError(f"tensor name too long: {name!r}")
            if arr.ndim > 0xFF:
                raise CheckpointError(f"tensor rank too large for '{name}'")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())
    if meta is not None:
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict | None]:
    """Read the container back; returns (tensors, metadata or None)."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:8] != MAGIC:
        raise CheckpointError(f"corrupt checkpoint: bad magic in {path}")
    off = 8

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(blob):
            raise CheckpointError(f"corrupt checkpoint: truncated at offset {off} in {path}")
        vals = struct.unpack_from(fmt, blob, off)
        off += size
        return vals

    (count,) = take("<I")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = take("<H")
        if off + nlen > len(blob):
            raise CheckpointError(f"corrupt checkpoint: truncated name in {path}")
        name = blob[off : off + nlen].decode("utf-8")
        off += nlen
        (rank,) = take("<B")
        dims = take(f"<{rank}I") if rank else ()
        n = int(np.prod(dims)) if rank else 1
        end = off + 4 * n
        if end > len(blob):
            raise CheckpointError(f"corrupt checkpoint: truncated data for '{name}' in {path}")
        arr = np.frombuffer(blob[off:end], dtype="<f4").reshape(dims)
        off = end
        tensors[name] = arr.copy()
    if off != len(blob):
        raise CheckpointError(f"corrupt checkpoint: {len(blob) - off} trailing bytes in {path}")

    meta = None
    sp = sidecar_path(path)
    if sp.exists():
        meta = json.loads(sp.read_text())
    return tensors, meta
