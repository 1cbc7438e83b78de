"""
NVF1 binary field format.

Layout: 8-byte magic ``NVF1\\0\\0\\0\\0``, little-endian u32 ``n``,
little-endian f64 ``L``, then ``n**2`` little-endian (re, im) f64 pairs
in row-major order.  All field I/O in this repository uses this format.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import Field2D, PeriodicGrid

MAGIC = b"NVF1\x00\x00\x00\x00"


class BadNVFFile(ValueError):
    """Raised when a file does not parse as NVF1."""


def write_field(path: str | Path, f: Field2D) -> None:
    n = f.grid.n
    payload = np.empty((n, n, 2), dtype="<f8")
    payload[..., 0] = f.samples.real
    payload[..., 1] = f.samples.imag
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", n))
        fh.write(struct.pack("<d", f.grid.half_side))
        fh.write(payload.tobytes())


def read_field(path: str | Path) -> Field2D:
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:8] != MAGIC:
        raise BadNVFFile(f"{path}: missing NVF1 magic")
    (n,) = struct.unpack("<I", raw[8:12])
    (half_side,) = struct.unpack("<d", raw[12:20])
    expected = 20 + 16 * n * n
    if len(raw) != expected:
        raise BadNVFFile(f"{path}: expected {expected} bytes, got {len(raw)}")
    payload = np.frombuffer(raw, dtype="<f8", offset=20).reshape(n, n, 2)
    samples = payload[..., 0] + 1j * payload[..., 1]
    return Field2D(PeriodicGrid(half_side, n), samples)
