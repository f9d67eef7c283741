"""File formats for snapshot matrices and named-matrix containers.

Snapshot matrix (one column per snapshot, column-major payload):

* CSV: a header row ``N,count,dt`` followed by N rows of ``count``
  comma-separated values; row i column j holds grid point i of snapshot j.
* Binary: little-endian throughout. Magic ``FSNP``, version uint32,
  N uint64, count uint64, dt float64, then ``N * count`` float64 values in
  column order.

Container (used for models and online-state checkpoints): little-endian.
Magic ``FMC1``, version uint32, metadata length uint64, UTF-8 JSON metadata,
array count uint64, then per array: name length uint16, UTF-8 name, dtype
code uint8 (0 = float64, 1 = complex128), rows uint64, cols uint64, and the
payload in column order.
"""

from __future__ import annotations

import json
import struct

import numpy as np

__all__ = [
    "save_snapshot_matrix",
    "load_snapshot_matrix",
    "save_container",
    "load_container",
]

_SNAP_MAGIC = b"FSNP"
_CONTAINER_MAGIC = b"FMC1"
_VERSION = 1
_DTYPES = {0: np.float64, 1: np.complex128}
_DTYPE_CODES = {np.dtype(np.float64): 0, np.dtype(np.complex128): 1}


def _is_csv(path) -> bool:
    return str(path).lower().endswith(".csv")


def save_snapshot_matrix(path, matrix, dt: float) -> None:
    """Write an (N, count) snapshot matrix; format chosen by extension."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("snapshot matrix must be 2-d and nonempty")
    n, count = m.shape
    if _is_csv(path):
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"{n},{count},{dt!r}\n")
            for row in m:
                fh.write(",".join(repr(v) for v in row) + "\n")
        return
    with open(path, "wb") as fh:
        fh.write(_SNAP_MAGIC)
        fh.write(struct.pack("<IQQd", _VERSION, n, count, dt))
        fh.write(np.asfortranarray(m).tobytes(order="F"))


def load_snapshot_matrix(path):
    """Read a snapshot matrix file; returns ``(matrix, dt)``."""
    if _is_csv(path):
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().strip().split(",")
            if len(header) != 3:
                raise ValueError(f"{path}: malformed snapshot CSV header")
            n, count, dt = int(header[0]), int(header[1]), float(header[2])
            m = np.loadtxt(fh, delimiter=",", ndmin=2)
        if m.shape != (n, count):
            raise ValueError(f"{path}: payload shape {m.shape} does not match header")
        return m, dt
    with open(path, "rb") as fh:
        if fh.read(4) != _SNAP_MAGIC:
            raise ValueError(f"{path}: not a snapshot matrix file")
        version, n, count, dt = struct.unpack("<IQQd", fh.read(28))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        data = np.frombuffer(fh.read(8 * n * count), dtype="<f8")
    if data.size != n * count:
        raise ValueError(f"{path}: truncated payload")
    return data.reshape((n, count), order="F").copy(), dt


def save_container(path, metadata: dict, arrays: dict) -> None:
    """Write named matrices plus a JSON metadata record to one binary file."""
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CONTAINER_MAGIC)
        fh.write(struct.pack("<IQ", _VERSION, len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<Q", len(arrays)))
        for name, arr in arrays.items():
            a = np.asarray(arr)
            if a.ndim == 1:
                a = a[:, None]
            if a.ndim != 2:
                raise ValueError(f"array {name!r} must be 1-d or 2-d")
            if np.iscomplexobj(a):
                a = a.astype(np.complex128)
            else:
                a = a.astype(np.float64)
            code = _DTYPE_CODES[a.dtype]
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<BQQ", code, a.shape[0], a.shape[1]))
            fh.write(np.asfortranarray(a).tobytes(order="F"))


def load_container(path):
    """Read a container file; returns ``(metadata, arrays)``."""
    with open(path, "rb") as fh:
        if fh.read(4) != _CONTAINER_MAGIC:
            raise ValueError(f"{path}: not a container file")
        version, meta_len = struct.unpack("<IQ", fh.read(12))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        metadata = json.loads(fh.read(meta_len).decode("utf-8"))
        (count,) = struct.unpack("<Q", fh.read(8))
        arrays = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            code, rows, cols = struct.unpack("<BQQ", fh.read(17))
            dtype = np.dtype(_DTYPES[code]).newbyteorder("<")
            raw = fh.read(dtype.itemsize * rows * cols)
            data = np.frombuffer(raw, dtype=dtype)
            if data.size != rows * cols:
                raise ValueError(f"{path}: truncated array {name!r}")
            arrays[name] = data.reshape((rows, cols), order="F").astype(_DTYPES[code])
    return metadata, arrays
