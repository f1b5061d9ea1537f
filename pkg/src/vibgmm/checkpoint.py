"""Self-describing binary weight checkpoints.

Layout: magic ``VIBW``, version (u32 LE), then one record per tensor:
name length (u64 LE), name bytes (utf-8), rank (u64 LE), dims (u64 LE each),
payload (float64 LE, row-major). Readable without knowing the model that
wrote it, which is what lets externally pretrained weights be imported.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"VIBW"
VERSION = 1


class CheckpointError(ValueError):
    """Malformed checkpoint file."""


def save_tensors(path, tensors: dict[str, np.ndarray]):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        for name, arr in tensors.items():
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            encoded = name.encode("utf-8")
            f.write(struct.pack("<Q", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<Q", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<Q", d))
            f.write(arr.tobytes())


def load_tensors(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        blob = f.read()

    def need(offset, n, what):
        if offset + n > len(blob):
            raise CheckpointError(
                f"truncated checkpoint: wanted {n} bytes for {what} at offset {offset}"
            )
        return blob[offset : offset + n], offset + n

    raw, off = need(0, 4, "magic")
    if raw != MAGIC:
        raise CheckpointError(f"bad magic {raw!r} at offset 0, expected {MAGIC!r}")
    raw, off = need(off, 4, "version")
    (version,) = struct.unpack("<I", raw)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")

    out: dict[str, np.ndarray] = {}
    while off < len(blob):
        raw, off = need(off, 8, "name length")
        (name_len,) = struct.unpack("<Q", raw)
        raw, off = need(off, name_len, "name")
        name = raw.decode("utf-8")
        raw, off = need(off, 8, "rank")
        (rank,) = struct.unpack("<Q", raw)
        dims = []
        for _ in range(rank):
            raw, off = need(off, 8, f"dims of {name!r}")
            dims.append(struct.unpack("<Q", raw)[0])
        count = int(np.prod(dims, dtype=np.int64)) if dims else 1
        raw, off = need(off, 8 * count, f"payload of {name!r}")
        out[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).copy()
    return out
