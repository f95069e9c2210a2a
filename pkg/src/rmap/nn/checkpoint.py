"""Flat binary container of named float arrays.

Layout (all integers little-endian)::

    b"RMAPCKPT"            8-byte magic
    uint32 version         currently 1
    uint64 header_length
    header                 UTF-8 JSON: {"meta": {...}, "tensors": [
                               {"name", "shape", "dtype", "offset", "nbytes"}, ...]}
    data                   concatenated little-endian arrays; offsets are
                           relative to the first data byte
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"RMAPCKPT"
VERSION = 1


def save_arrays(path, arrays: dict, meta: dict | None = None) -> None:
    entries, blobs, offset = [], [], 0
    for name in arrays:
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        raw = arr.tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": "<f8", "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"meta": meta or {}, "tensors": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(header)))
        f.write(header)
        for raw in blobs:
            f.write(raw)


def load_arrays(path):
    """Return ``(arrays, meta)`` from a file written by :func:`save_arrays`."""
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    version, hlen = struct.unpack_from("<IQ", buf, 8)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    start = 8 + struct.calcsize("<IQ")
    header = json.loads(buf[start:start + hlen].decode("utf-8"))
    data = memoryview(buf)[start + hlen:]
    arrays = {}
    for e in header["tensors"]:
        raw = data[e["offset"]:e["offset"] + e["nbytes"]]
        arrays[e["name"]] = np.frombuffer(raw, dtype=e["dtype"]).reshape(e["shape"]).astype(np.float64)
    return arrays, header["meta"]
