"""Parameter checkpoint format.

Layout: magic "CILW", version u32, count u32, then per tensor:
name length u32 + UTF-8 name, rank u32, dims u32 each, little-endian
float32 values. An optional trailer ("CILC", length u32, UTF-8 JSON)
carries run configuration; plain readers stop after the last tensor.
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

MAGIC = b"CILW"
CONFIG_MAGIC = b"CILC"
VERSION = 1


class CheckpointFormatError(ValueError):
    pass


def write_checkpoint(path, tensors: dict, config: dict | None = None):
    """Write named float32 arrays; iteration order of ``tensors`` is preserved."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", VERSION, len(tensors)))
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype=np.float32)
        nb = name.encode("utf-8")
        buf.write(struct.pack("<I", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.astype("<f4").tobytes())
    if config is not None:
        cb = json.dumps(config, sort_keys=True).encode("utf-8")
        buf.write(CONFIG_MAGIC)
        buf.write(struct.pack("<I", len(cb)))
        buf.write(cb)
    data = buf.getvalue()
    with open(path, "wb") as f:
        f.write(data)
    return data


def read_checkpoint(path):
    """Return (ordered name->array dict, config dict or None)."""
    with open(path, "rb") as f:
        raw = f.read()
    return parse_checkpoint(raw)


def parse_checkpoint(raw: bytes):
    if raw[:4] != MAGIC:
        raise CheckpointFormatError(f"bad magic {raw[:4]!r}")
    off = 4
    version, count = struct.unpack_from("<II", raw, off)
    off += 8
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported version {version}")
    tensors: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", raw, off)
            off += 4
            name = raw[off:off + nlen].decode("utf-8")
            off += nlen
            (rank,) = struct.unpack_from("<I", raw, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}I", raw, off)
            off += 4 * rank
            n = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(raw, dtype="<f4", count=n, offset=off).reshape(dims)
            off += 4 * n
            tensors[name] = arr.copy()
    except (struct.error, ValueError) as e:
        raise CheckpointFormatError(f"truncated checkpoint: {e}") from e
    config = None
    if raw[off:off + 4] == CONFIG_MAGIC:
        (clen,) = struct.unpack_from("<I", raw, off + 4)
        config = json.loads(raw[off + 8:off + 8 + clen].decode("utf-8"))
    return tensors, config
