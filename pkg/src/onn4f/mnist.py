"""MNIST IDX ingestion, amplitude embedding, dataset splitting.

IDX is big-endian: magic u32 (0x00000803 for images, 0x00000801 for labels),
then one u32 per dimension, then raw unsigned bytes.  This module never
downloads anything; missing files are reported with the canonical names so
the user can fetch them.

Images are embedded as amplitude: pixel bytes scaled to [0,1], bilinearly
resized from 28x28 to (3N/4)x(3N/4) and centered on an N x N zero grid.
The N/8 dark border keeps diffraction off the grid edge and the detector
regions off the digit.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DATA_DIR_ENV = "ONN4F_DATA_DIR"

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

CANONICAL_FILES = (
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
)

TRAIN_COUNT = 60_000
TEST_COUNT = 10_000
VAL_COUNT = 5_000


class MnistError(Exception):
    """Base class for MNIST ingestion failures."""


class IdxMagicError(MnistError):
    pass


class IdxDimensionError(MnistError):
    pass


class IdxTruncatedError(MnistError):
    pass


class CountMismatchError(MnistError):
    pass


class DataError(MnistError):
    """Counts or values outside what the pipeline accepts."""


class ConfigError(ValueError):
    """Embedding grid too small for the 28x28 digits."""


class MissingDataError(MnistError):
    """Expected IDX files are absent from the data directory."""


def _read_header(data: bytes, path, expected_magic: int, ndim: int) -> tuple:
    head = 4 * (1 + ndim)
    if len(data) < head:
        raise IdxTruncatedError(f"{path}: {len(data)} bytes, header needs {head}")
    magic = struct.unpack_from(">I", data)[0]
    if magic != expected_magic:
        raise IdxMagicError(
            f"{path}: magic {magic:#010x}, expected {expected_magic:#010x}"
        )
    return struct.unpack_from(f">{ndim}I", data, 4)


def load_idx(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Parse an images/labels IDX pair.

    Returns (images (M, 28, 28) uint8, labels (M,) uint8) with matching M.
    """
    images_path, labels_path = Path(images_path), Path(labels_path)

    data = images_path.read_bytes()
    count, rows, cols = _read_header(data, images_path, IMAGE_MAGIC, 3)
    if (rows, cols) != (28, 28):
        raise IdxDimensionError(f"{images_path}: images are {rows}x{cols}, not 28x28")
    expected = 16 + count * rows * cols
    if len(data) != expected:
        raise IdxTruncatedError(
            f"{images_path}: expected {expected} bytes, got {len(data)}"
        )
    images = np.frombuffer(data, dtype=np.uint8, offset=16).reshape(count, rows, cols)

    data = labels_path.read_bytes()
    (label_count,) = _read_header(data, labels_path, LABEL_MAGIC, 1)
    expected = 8 + label_count
    if len(data) != expected:
        raise IdxTruncatedError(
            f"{labels_path}: expected {expected} bytes, got {len(data)}"
        )
    labels = np.frombuffer(data, dtype=np.uint8, offset=8)
    if label_count != count:
        raise CountMismatchError(
            f"{count} images but {label_count} labels "
            f"({images_path.name} / {labels_path.name})"
        )
    if labels.size and labels.max() > 9:
        raise DataError(f"{labels_path}: label {labels.max()} out of range 0-9")
    return images, labels


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Inverse of load_idx, for building fixture files."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    count, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGE_MAGIC, count, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", LABEL_MAGIC, len(labels)))
        fh.write(labels.tobytes())


_resize_cache: dict[int, np.ndarray] = {}


def _resize_matrix(target: int, source: int = 28) -> np.ndarray:
    """Row-stochastic bilinear interpolation matrix (target x source).

    Align-corners sampling: output index t reads source coordinate
    t*(source-1)/(target-1).  Weights are convex, so values stay within the
    input range.
    """
    mat = _resize_cache.get(target)
    if mat is not None:
        return mat
    mat = np.zeros((target, source))
    scale = (source - 1) / (target - 1)
    for t in range(target):
        x = t * scale
        lo = min(int(x), source - 2)
        # t*(source-1)/(target-1) can land a few ulp past the endpoint;
        # clamping keeps every weight in [0,1] so outputs never go negative
        frac = min(max(x - lo, 0.0), 1.0)
        mat[t, lo] = 1.0 - frac
        mat[t, lo + 1] = frac
    _resize_cache[target] = mat
    return mat


def embed(raw, grid_size: int) -> np.ndarray:
    """Embed 28x28 pixel bytes (or a batch of them) onto the N x N grid."""
    n = grid_size
    if n < 32 or n & (n - 1):
        raise ConfigError(f"grid size must be a power of two >= 32, got {n}")
    arr = np.asarray(raw)
    if arr.shape[-2:] != (28, 28):
        raise DataError(f"raw images must be 28x28, got shape {arr.shape}")
    x = arr.astype(np.float64)
    if np.issubdtype(arr.dtype, np.integer):
        x /= 255.0
    target = 3 * n // 4
    a = _resize_matrix(target)
    digit = a @ x @ a.T
    border = n // 8
    out = np.zeros(arr.shape[:-2] + (n, n), dtype=np.float64)
    out[..., border : border + target, border : border + target] = digit
    return out


@dataclass(frozen=True)
class Sample:
    image: np.ndarray  # (N, N) float64 in [0, 1]
    label: int


@dataclass(frozen=True)
class Dataset:
    """An ordered split of MNIST, embedded lazily.

    Raw 28x28 bytes are kept in memory (47 MB for the full train file);
    batches are embedded to the simulation grid on demand, which keeps the
    footprint independent of grid size.
    """

    images: np.ndarray  # (M, 28, 28) uint8
    labels: np.ndarray  # (M,) uint8
    grid_size: int
    split: str

    def __len__(self) -> int:
        return len(self.labels)

    def batch(self, indices) -> tuple[np.ndarray, np.ndarray]:
        idx = np.asarray(indices)
        return embed(self.images[idx], self.grid_size), self.labels[idx].astype(np.int64)

    def sample(self, i: int) -> Sample:
        return Sample(embed(self.images[i], self.grid_size), int(self.labels[i]))

    def subset(self, count: int) -> "Dataset":
        """First ``count`` samples, order preserved."""
        if not 1 <= count <= len(self):
            raise DataError(f"subset of {count} from {len(self)} samples")
        return Dataset(
            self.images[:count], self.labels[:count], self.grid_size, self.split
        )


def split(
    train_images: np.ndarray,
    train_labels: np.ndarray,
    test_images: np.ndarray,
    test_labels: np.ndarray,
    grid_size: int,
) -> tuple[Dataset, Dataset, Dataset]:
    """First 55,000 train pairs for training, last 5,000 for validation.

    Order within each split is preserved; shuffling is the trainer's job.
    """
    if len(train_labels) != TRAIN_COUNT:
        raise DataError(f"expected {TRAIN_COUNT} training pairs, got {len(train_labels)}")
    if len(test_labels) != TEST_COUNT:
        raise DataError(f"expected {TEST_COUNT} test pairs, got {len(test_labels)}")
    cut = TRAIN_COUNT - VAL_COUNT
    return (
        Dataset(train_images[:cut], train_labels[:cut], grid_size, "train"),
        Dataset(train_images[cut:], train_labels[cut:], grid_size, "validation"),
        Dataset(test_images, test_labels, grid_size, "test"),
    )


def resolve_data_dir(flag_value: str | None) -> Path:
    """--data-dir flag wins; otherwise the environment variable."""
    if flag_value:
        return Path(flag_value)
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    raise MissingDataError(
        f"no data directory: pass --data-dir or set {DATA_DIR_ENV}"
    )


def load_dataset_dir(data_dir, grid_size: int) -> tuple[Dataset, Dataset, Dataset]:
    """Load the four canonical IDX files from a directory and split them."""
    base = Path(data_dir)
    paths = [base / name for name in CANONICAL_FILES]
    missing = [p.name for p in paths if not p.is_file()]
    if missing:
        raise MissingDataError(
            f"missing MNIST files in {base}: {', '.join(missing)} "
            f"(expected the canonical uncompressed IDX names: "
            f"{', '.join(CANONICAL_FILES)})"
        )
    train_images, train_labels = load_idx(paths[0], paths[1])
    test_images, test_labels = load_idx(paths[2], paths[3])
    return split(train_images, train_labels, test_images, test_labels, grid_size)
