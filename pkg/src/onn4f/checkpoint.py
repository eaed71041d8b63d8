"""Binary model checkpoints.

Layout (little-endian):

    magic   4 bytes  b"CONN"
    version u32      format version, currently 1
    layers  u32
    grid    u32
    shift   f64      activation shift
    payload layers * 3 grids of f64, row-major, order W, B, theta per layer
    crc     u32      CRC32 of every preceding byte

Loading validates everything before constructing a model; on any failure a
specific CheckpointError subclass is raised and nothing partial is returned.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .optics import DetectorLayout, LayerParams, Model

MAGIC = b"CONN"
VERSION = 1

_HEADER = struct.Struct("<4sIIId")


class CheckpointError(Exception):
    """Base class for unreadable or inconsistent checkpoint files."""


class CheckpointMagicError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


class CheckpointChecksumError(CheckpointError):
    pass


def save_checkpoint(model: Model, path) -> None:
    """Write the model's parameters; round trips are bit-exact."""
    parts = [
        _HEADER.pack(
            MAGIC, VERSION, model.num_layers, model.grid_size, model.activation_shift
        )
    ]
    for layer in model.layers:
        for grid in (layer.weight, layer.bias, layer.phase):
            parts.append(np.ascontiguousarray(grid, dtype="<f8").tobytes())
    blob = b"".join(parts)
    blob += struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF)
    Path(path).write_bytes(blob)


def load_checkpoint(path) -> Model:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 4:
        raise CheckpointTruncatedError(
            f"{path}: {len(data)} bytes, too short for the magic"
        )
    if data[:4] != MAGIC:
        raise CheckpointMagicError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < _HEADER.size:
        raise CheckpointTruncatedError(
            f"{path}: {len(data)} bytes, header needs {_HEADER.size}"
        )
    _, version, layers, grid, shift = _HEADER.unpack_from(data)
    if version != VERSION:
        raise CheckpointVersionError(f"{path}: version {version}, supported {VERSION}")
    if layers < 1:
        raise CheckpointShapeError(f"{path}: layer count {layers} < 1")
    if grid < 1 or grid & (grid - 1):
        raise CheckpointShapeError(f"{path}: grid size {grid} is not a power of two")
    if not (shift >= 0.0 and np.isfinite(shift)):
        raise CheckpointShapeError(f"{path}: activation shift {shift} invalid")
    payload = layers * 3 * grid * grid * 8
    expected = _HEADER.size + payload + 4
    if len(data) < expected:
        raise CheckpointTruncatedError(
            f"{path}: expected {expected} bytes, got {len(data)}"
        )
    if len(data) > expected:
        raise CheckpointShapeError(
            f"{path}: {len(data) - expected} trailing bytes after declared payload"
        )
    (stored_crc,) = struct.unpack_from("<I", data, expected - 4)
    actual_crc = zlib.crc32(data[: expected - 4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise CheckpointChecksumError(
            f"{path}: CRC32 {actual_crc:#010x} != stored {stored_crc:#010x}"
        )
    grids = np.frombuffer(
        data, dtype="<f8", count=layers * 3 * grid * grid, offset=_HEADER.size
    ).reshape(layers, 3, grid, grid)
    params = tuple(
        LayerParams(grids[i, 0].copy(), grids[i, 1].copy(), grids[i, 2].copy())
        for i in range(layers)
    )
    try:
        # the format stores no detector geometry; loads get the default layout
        detector = DetectorLayout.default(grid)
    except ValueError as exc:
        raise CheckpointShapeError(f"{path}: grid {grid} too small for a detector") from exc
    return Model(params, grid, shift, detector)
