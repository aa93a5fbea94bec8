"""Dataset loading: IDX (MNIST layout) and CIFAR-10 binary files.

Pixels are scaled to [0, 1] by dividing by 255; no further normalization.
Splitting and batching are deterministic given explicit seeds.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073  # 1 label byte + 3 * 1024 channel-planar pixels


class DataFormatError(ValueError):
    """Base class for binary dataset parsing failures."""


class BadMagicError(DataFormatError):
    pass


class TruncatedFileError(DataFormatError):
    pass


class CountMismatchError(DataFormatError):
    pass


@dataclass
class LabeledImageSet:
    """Decoded dataset: images (N, H, W, C) in [0, 1], integer labels."""

    images: np.ndarray
    labels: np.ndarray
    name: str
    class_count: int

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise CountMismatchError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return len(self.images)

    def subset(self, indices: np.ndarray) -> "LabeledImageSet":
        return LabeledImageSet(self.images[indices], self.labels[indices],
                               self.name, self.class_count)

    def limit(self, n: int | None) -> "LabeledImageSet":
        """Deterministic prefix subset; n in (None, 0) means everything."""
        if not n or n >= len(self):
            return self
        return self.subset(np.arange(n))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0


def _read_exact(f, count: int, path, what: str) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise TruncatedFileError(
            f"{path}: expected {count} bytes for {what}, got {len(data)}"
        )
    return data


def read_idx_images(path) -> np.ndarray:
    """Parse an IDX image file to a uint8 array (N, rows, cols)."""
    path = Path(path)
    with open(path, "rb") as f:
        magic, = struct.unpack(">i", _read_exact(f, 4, path, "magic"))
        if magic != IDX_IMAGE_MAGIC:
            raise BadMagicError(
                f"{path}: bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"
            )
        count, rows, cols = struct.unpack(">iii", _read_exact(f, 12, path, "dimensions"))
        pixels = _read_exact(f, count * rows * cols, path, f"{count} images")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    """Parse an IDX label file to a uint8 vector."""
    path = Path(path)
    with open(path, "rb") as f:
        magic, = struct.unpack(">i", _read_exact(f, 4, path, "magic"))
        if magic != IDX_LABEL_MAGIC:
            raise BadMagicError(
                f"{path}: bad label magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}"
            )
        count, = struct.unpack(">i", _read_exact(f, 4, path, "count"))
        labels = _read_exact(f, count, path, f"{count} labels")
    return np.frombuffer(labels, dtype=np.uint8)


def write_idx_images(path, images: np.ndarray) -> None:
    """Write a uint8 (N, rows, cols) array in IDX image layout."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", IDX_IMAGE_MAGIC, n, rows, cols))
        f.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">ii", IDX_LABEL_MAGIC, len(labels)))
        f.write(labels.tobytes())


def load_mnist(images_path, labels_path, name: str = "mnist") -> LabeledImageSet:
    """Load an IDX image/label file pair into a grayscale dataset."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise CountMismatchError(
            f"{images_path} holds {len(images)} images but "
            f"{labels_path} holds {len(labels)} labels"
        )
    scaled = (images.astype(np.float32) / 255.0)[:, :, :, None]
    return LabeledImageSet(scaled, labels.astype(np.int64), name, class_count=10)


def load_cifar10(batch_paths, name: str = "cifar10") -> LabeledImageSet:
    """Load one or more CIFAR-10 binary batch files (3073-byte records)."""
    all_images = []
    all_labels = []
    for path in batch_paths:
        raw = Path(path).read_bytes()
        if len(raw) == 0 or len(raw) % CIFAR_RECORD_BYTES != 0:
            raise TruncatedFileError(
                f"{path}: size {len(raw)} is not a positive multiple of {CIFAR_RECORD_BYTES}"
            )
        records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        all_labels.append(records[:, 0])
        planes = records[:, 1:].reshape(-1, 3, 32, 32)  # channel-planar R, G, B
        all_images.append(planes.transpose(0, 2, 3, 1))
    images = np.concatenate(all_images).astype(np.float32) / 255.0
    labels = np.concatenate(all_labels).astype(np.int64)
    return LabeledImageSet(images, labels, name, class_count=10)


def write_cifar10(path, images: np.ndarray, labels: np.ndarray) -> None:
    """Write uint8 (N, 32, 32, 3) images + labels as CIFAR-10 binary records."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    planes = images.transpose(0, 3, 1, 2).reshape(len(images), -1)
    records = np.concatenate([labels[:, None], planes], axis=1)
    Path(path).write_bytes(records.tobytes())


def split(dataset: LabeledImageSet, spec: SplitSpec) -> tuple[LabeledImageSet, LabeledImageSet]:
    """Deterministic shuffled split; the first train_fraction goes to train."""
    n = len(dataset)
    if n < 2:
        raise ValueError("need at least 2 examples to split")
    order = np.random.default_rng(spec.seed).permutation(n)
    cut = int(n * spec.train_fraction)
    return dataset.subset(order[:cut]), dataset.subset(order[cut:])


def batches(dataset: LabeledImageSet, batch_size: int, *, shuffle: bool,
            seed: int = 0, epoch: int = 0):
    """Yield (images, labels) mini-batches; order derives from (seed, epoch).

    The final partial batch is emitted.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = len(dataset)
    if shuffle:
        order = np.random.default_rng((seed, epoch)).permutation(n)
    else:
        order = np.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        yield dataset.images[idx], dataset.labels[idx]
