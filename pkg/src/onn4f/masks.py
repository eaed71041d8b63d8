"""Export trained parameters as device-loadable rasters.

Each parameter grid becomes two files: a little-endian f32 raster with a
16-byte header (magic "MASK", version u32, rows u32, cols u32) that a
modulator driver can memory-map, and an 8-bit binary PGM preview for eyes.
Phase is wrapped to [0, 2pi) before export since only theta mod 2pi is
physical; weight and bias keep their raw range and get min-max normalized
previews.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .optics import Model

MASK_MAGIC = b"MASK"
MASK_VERSION = 1

_TWO_PI = 2.0 * np.pi


class MaskFormatError(Exception):
    """Raster file malformed."""


def write_raster(path, values: np.ndarray) -> None:
    grid = np.ascontiguousarray(values, dtype="<f4")
    if grid.ndim != 2:
        raise ValueError(f"raster must be 2D, got shape {grid.shape}")
    rows, cols = grid.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", MASK_MAGIC, MASK_VERSION, rows, cols))
        fh.write(grid.tobytes())


def read_raster(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise MaskFormatError(f"{path}: {len(data)} bytes, header needs 16")
    magic, version, rows, cols = struct.unpack_from("<4sIII", data)
    if magic != MASK_MAGIC:
        raise MaskFormatError(f"{path}: bad magic {magic!r}")
    if version != MASK_VERSION:
        raise MaskFormatError(f"{path}: version {version}, supported {MASK_VERSION}")
    expected = 16 + rows * cols * 4
    if len(data) != expected:
        raise MaskFormatError(f"{path}: expected {expected} bytes, got {len(data)}")
    return np.frombuffer(data, dtype="<f4", offset=16).reshape(rows, cols)


def write_pgm(path, gray: np.ndarray) -> None:
    grid = np.ascontiguousarray(gray, dtype=np.uint8)
    rows, cols = grid.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(grid.tobytes())


def wrap_phase(theta: np.ndarray) -> np.ndarray:
    """Map angles into [0, 2pi)."""
    return np.mod(theta, _TWO_PI)


def _phase_preview(theta: np.ndarray) -> np.ndarray:
    # linear [0, 2pi) -> [0, 255]; wrapped values never reach 2pi
    return np.clip(np.floor(wrap_phase(theta) * (256.0 / _TWO_PI)), 0, 255).astype(
        np.uint8
    )


def _minmax_preview(values: np.ndarray) -> np.ndarray:
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        return np.zeros(values.shape, dtype=np.uint8)
    return np.round((values - lo) * (255.0 / (hi - lo))).astype(np.uint8)


def export_masks(model: Model, out_dir) -> list[Path]:
    """Write raster + preview per parameter per layer; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for li, layer in enumerate(model.layers, start=1):
        exports = (
            ("phase", wrap_phase(layer.phase), _phase_preview(layer.phase)),
            ("weight", layer.weight, _minmax_preview(layer.weight)),
            ("bias", layer.bias, _minmax_preview(layer.bias)),
        )
        for name, raster, preview in exports:
            raster_path = out / f"layer{li}_{name}.mask"
            pgm_path = out / f"layer{li}_{name}.pgm"
            write_raster(raster_path, raster)
            write_pgm(pgm_path, preview)
            written += [raster_path, pgm_path]
    return written
