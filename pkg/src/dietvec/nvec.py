"""Binary vector-table files.

Layout (little-endian): magic ``NVEC``, u32 version, u32 dimension, u32 row
count, then per row a u32 key length, the UTF-8 key, and ``dimension`` float32
values.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"NVEC"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
_LEN = struct.Struct("<I")


class NvecError(ValueError):
    pass


def write_nvec(path: str | Path, keys: Sequence[str], matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != len(keys):
        raise NvecError(f"matrix shape {matrix.shape} does not match {len(keys)} keys")
    rows = matrix.astype("<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, matrix.shape[1], len(keys)))
        for key, row in zip(keys, rows):
            encoded = str(key).encode("utf-8")
            fh.write(_LEN.pack(len(encoded)))
            fh.write(encoded)
            fh.write(row.tobytes())


def read_nvec(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Return keys and a float64 matrix."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise NvecError(f"{path}: truncated header")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise NvecError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise NvecError(f"{path}: unsupported version {version}")
    keys: list[str] = []
    matrix = np.empty((count, dim), dtype=np.float64)
    pos = _HEADER.size
    width = 4 * dim
    for i in range(count):
        if pos + _LEN.size > len(data):
            raise NvecError(f"{path}: truncated at row {i}")
        (n,) = _LEN.unpack_from(data, pos)
        pos += _LEN.size
        if pos + n + width > len(data):
            raise NvecError(f"{path}: truncated at row {i}")
        keys.append(data[pos:pos + n].decode("utf-8"))
        pos += n
        matrix[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=pos)
        pos += width
    if pos != len(data):
        raise NvecError(f"{path}: {len(data) - pos} trailing bytes")
    return keys, matrix
