"""Binary tensor file formats.

``TNSR`` v1 layout, all little-endian:

    magic ``TNSR`` (4 bytes), u32 version = 1, u32 order N, N x u64 dims,
    then prod(dims) f64 values in the canonical linearization
    (mode-0 index fastest).

Mask files are identical except the magic is ``MASK`` and the payload holds
u8 values restricted to {0, 1}.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .tensor import as_mask, as_tensor

TENSOR_MAGIC = b"TNSR"
MASK_MAGIC = b"MASK"
FORMAT_VERSION = 1

__all__ = ["read_mask", "read_tensor", "write_mask", "write_tensor"]


def _write(path, magic: bytes, arr: np.ndarray, dtype: str) -> None:
    dims = arr.shape
    header = struct.pack(f"<4sII{len(dims)}Q", magic, FORMAT_VERSION, len(dims), *dims)
    payload = arr.flatten(order="F").astype(dtype).tobytes()
    Path(path).write_bytes(header + payload)


def _read(path, magic: bytes, dtype: str):
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise ValueError(f"{path}: truncated header")
    got_magic, version, order = struct.unpack_from("<4sII", raw)
    if got_magic != magic:
        raise ValueError(f"{path}: bad magic {got_magic!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    if order < 1:
        raise ValueError(f"{path}: order must be >= 1, got {order}")
    dims_end = 12 + 8 * order
    if len(raw) < dims_end:
        raise ValueError(f"{path}: truncated dimension list")
    dims = struct.unpack_from(f"<{order}Q", raw, 12)
    if any(d < 1 for d in dims):
        raise ValueError(f"{path}: nonpositive mode size in {dims}")
    count = int(np.prod([int(d) for d in dims], dtype=object))
    flat = np.frombuffer(raw, dtype=dtype, offset=dims_end)
    if flat.size != count:
        raise ValueError(f"{path}: payload has {flat.size} values, expected {count}")
    return flat.reshape(dims, order="F")


def write_tensor(path, t: np.ndarray) -> None:
    _write(path, TENSOR_MAGIC, as_tensor(t), "<f8")


def read_tensor(path) -> np.ndarray:
    return as_tensor(_read(path, TENSOR_MAGIC, "<f8"))


def write_mask(path, m: np.ndarray) -> None:
    _write(path, MASK_MAGIC, as_mask(m), "u1")


def read_mask(path) -> np.ndarray:
    return as_mask(_read(path, MASK_MAGIC, "u1"))
