"""FNSV binary field files.

Layout (little-endian throughout)::

    b"FNSV"            magic, 4 bytes
    u32                version (= 1)
    u8                 dimension d
    u8                 components m
    u16                reserved (= 0)
    d x u64            points per axis
    f64                box length L
    m * N^d x f64      samples, component-major, x_1 fastest

Samples are physical values on the grid nodes, not Fourier coefficients, so
no transform normalisation is involved.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import Field, GridSpec

MAGIC = b"FNSV"
VERSION = 1
_HEAD = struct.Struct("<4sIBBH")


def encode_field(f: Field) -> bytes:
    grid = f.grid
    head = _HEAD.pack(MAGIC, VERSION, grid.d, f.components, 0)
    dims = struct.pack(f"<{grid.d}Q", *grid.shape)
    length = struct.pack("<d", grid.length)
    payload = np.concatenate([c.ravel(order="F") for c in f.data]).astype("<f8").tobytes()
    return head + dims + length + payload


def decode_field(blob: bytes) -> Field:
    if len(blob) < _HEAD.size:
        raise ValueError("truncated FNSV header")
    magic, version, d, m, reserved = _HEAD.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported FNSV version {version}")
    if reserved != 0:
        raise ValueError("reserved header field must be zero")
    offset = _HEAD.size
    dims = struct.unpack_from(f"<{d}Q", blob, offset)
    offset += 8 * d
    (length,) = struct.unpack_from("<d", blob, offset)
    offset += 8
    if len(set(dims)) != 1:
        raise ValueError(f"only isotropic grids are supported, got {dims}")
    grid = GridSpec(d, int(dims[0]), float(length))
    count = m * grid.size
    if len(blob) - offset != 8 * count:
        raise ValueError(f"payload has {len(blob) - offset} bytes, expected {8 * count}")
    flat = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).astype(float)
    data = np.stack([c.reshape(grid.shape, order="F") for c in flat.reshape(m, grid.size)])
    return Field(grid, data)


def write_field(path: str | Path, f: Field) -> None:
    Path(path).write_bytes(encode_field(f))


def read_field(path: str | Path) -> Field:
    return decode_field(Path(path).read_bytes())
