"""Point-cloud files: CSV with round-trip floats and a compact little-endian binary."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .codiagonal import PointCloud, as_points

MAGIC = b"CDLB1"
_HEADER = struct.Struct("<IQ")


def write_csv(cloud, path) -> Path:
    P = as_points(cloud)
    n = P.shape[1]
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        fh.write(",".join(f"x{i}" for i in range(n)) + "\n")
        # repr of a Python float is the shortest string that round-trips
        for row in P.tolist():
            fh.write(",".join(map(repr, row)) + "\n")
    return path


def read_csv(path) -> PointCloud:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        if not header or any(h != f"x{i}" for i, h in enumerate(header)):
            raise ValueError(f"{path}: header must be x0,x1,...")
        rows = [list(map(float, line.split(","))) for line in fh if line.strip()]
    n = len(header)
    return PointCloud(n, np.array(rows, dtype=float).reshape(-1, n))


def write_binary(cloud, path) -> Path:
    P = np.ascontiguousarray(as_points(cloud), dtype="<f8")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(P.shape[1], P.shape[0]))
        fh.write(P.tobytes())
    return path


def read_binary(path) -> PointCloud:
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a point-cloud binary (bad magic)")
    n, count = _HEADER.unpack_from(data, len(MAGIC))
    off = len(MAGIC) + _HEADER.size
    body = data[off:]
    if len(body) != 8 * n * count:
        raise ValueError(f"{path}: expected {count} x {n} floats, found {len(body)} bytes")
    return PointCloud(n, np.frombuffer(body, dtype="<f8").astype(float).reshape(count, n))


def read_cloud(path) -> PointCloud:
    """Read either format, sniffing the magic bytes."""
    with Path(path).open("rb") as fh:
        head = fh.read(len(MAGIC))
    return read_binary(path) if head == MAGIC else read_csv(path)
