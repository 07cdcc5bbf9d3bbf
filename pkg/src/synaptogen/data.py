"""Dataset ingestion, stratified small-data subsampling, and normalization.

Two binary formats are parsed bit-exactly:

* IDX (MNIST layout): big-endian headers, magic 0x00000803 for images and
  0x00000801 for labels, unsigned-byte pixels.
* CIFAR-10 binary: 3073-byte records, one label byte followed by 3072
  channel-major pixel bytes (1024 R, 1024 G, 1024 B, each 32x32 row-major).

SVHN has no native parser here; it must be converted offline into one of
the two layouts above (see README).  Loaders never silently truncate: byte
counts must match the headers exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .numerics import make_rng

__all__ = [
    "IDX_IMAGE_MAGIC",
    "IDX_LABEL_MAGIC",
    "LabeledDataset",
    "SubsampleSpec",
    "NormStats",
    "load_idx",
    "load_cifar10_bin",
    "subsample_per_class",
    "compute_norm_stats",
    "normalize",
    "pad_to_32",
]

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

CIFAR_RECORD_BYTES = 3073  # 1 label byte + 3 * 32 * 32 pixels

NUM_CLASSES = 10

STD_FLOOR = 1e-6


@dataclass
class LabeledDataset:
    """An immutable image batch with integer class labels.

    ``images`` is [N, C, H, W] float64; raw loads carry values in
    [0, 255] until :func:`normalize` is applied.
    """

    images: np.ndarray
    labels: np.ndarray  # [N] int64, values in [0, 10)
    name: str
    split: str  # "train" | "test"

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ValueError(f"images must be [N,C,H,W], got shape {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise ValueError(
                f"label count {self.labels.shape} does not match image count "
                f"{self.images.shape[0]}"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES):
            raise ValueError(f"labels must lie in [0, {NUM_CLASSES})")

    def __len__(self) -> int:
        return self.images.shape[0]


@dataclass(frozen=True)
class SubsampleSpec:
    per_class: int = 38
    seed: int = 0

    def __post_init__(self):
        if self.per_class < 1:
            raise ValueError(f"per_class must be >= 1, got {self.per_class}")


@dataclass(frozen=True)
class NormStats:
    """Per-channel mean and std of [0,1]-scaled pixels."""

    mean: np.ndarray  # [C]
    std: np.ndarray   # [C], floored at STD_FLOOR


def _read_be32(fh, path, what):
    raw = fh.read(4)
    if len(raw) != 4:
        raise ValueError(f"{path}: truncated file while reading {what}")
    return struct.unpack(">I", raw)[0]


def load_idx(images_path, labels_path, name: str = "idx", split: str = "train") -> LabeledDataset:
    """Parse an IDX image/label file pair into a dataset.

    Grayscale images come back as [N, 1, H, W] with raw byte values.
    """
    images_path, labels_path = Path(images_path), Path(labels_path)
    with open(images_path, "rb") as fh:
        magic = _read_be32(fh, images_path, "magic")
        if magic != IDX_IMAGE_MAGIC:
            raise ValueError(
                f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"
            )
        n = _read_be32(fh, images_path, "image count")
        h = _read_be32(fh, images_path, "row count")
        w = _read_be32(fh, images_path, "column count")
        payload = fh.read()
    if len(payload) != n * h * w:
        raise ValueError(
            f"{images_path}: truncated file: header promises {n * h * w} pixel "
            f"bytes, found {len(payload)}"
        )
    images = np.frombuffer(payload, dtype=np.uint8).reshape(n, 1, h, w)

    with open(labels_path, "rb") as fh:
        magic = _read_be32(fh, labels_path, "magic")
        if magic != IDX_LABEL_MAGIC:
            raise ValueError(
                f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}"
            )
        n_labels = _read_be32(fh, labels_path, "label count")
        label_payload = fh.read()
    if len(label_payload) != n_labels:
        raise ValueError(
            f"{labels_path}: truncated file: header promises {n_labels} labels, "
            f"found {len(label_payload)}"
        )
    if n_labels != n:
        raise ValueError(
            f"image/label count mismatch: {images_path} has {n}, "
            f"{labels_path} has {n_labels}"
        )
    labels = np.frombuffer(label_payload, dtype=np.uint8).astype(np.int64)
    return LabeledDataset(images.astype(np.float64), labels, name=name, split=split)


def load_cifar10_bin(paths, name: str = "cifar10", split: str = "train") -> LabeledDataset:
    """Parse one or more CIFAR-10 binary batch files into a dataset."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    chunks, label_chunks = [], []
    for path in map(Path, paths):
        raw = path.read_bytes()
        if len(raw) == 0 or len(raw) % CIFAR_RECORD_BYTES != 0:
            raise ValueError(
                f"{path}: bad record length: {len(raw)} bytes is not a positive "
                f"multiple of {CIFAR_RECORD_BYTES}"
            )
        records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        labels = records[:, 0].astype(np.int64)
        if labels.max() >= NUM_CLASSES:
            bad = int(labels.max())
            raise ValueError(f"{path}: label {bad} out of range [0, {NUM_CLASSES})")
        chunks.append(records[:, 1:].reshape(-1, 3, 32, 32))
        label_chunks.append(labels)
    images = np.concatenate(chunks).astype(np.float64)
    labels = np.concatenate(label_chunks)
    return LabeledDataset(images, labels, name=name, split=split)


def subsample_per_class(data: LabeledDataset, spec: SubsampleSpec) -> LabeledDataset:
    """Select exactly ``spec.per_class`` examples of every class.

    Each class's index list is shuffled with the seeded generator
    (Fisher-Yates via numpy permutation) and the first ``per_class`` taken;
    the union is then shuffled once more so class blocks do not survive in
    the output order.  Deterministic in (data order, spec).
    """
    rng = make_rng(spec.seed)
    picked = []
    for cls in np.unique(data.labels):
        idx = np.flatnonzero(data.labels == cls)
        if idx.size < spec.per_class:
            raise ValueError(
                f"class {int(cls)} has only {idx.size} examples, "
                f"need {spec.per_class}"
            )
        picked.append(rng.permutation(idx)[: spec.per_class])
    order = rng.permutation(np.concatenate(picked))
    return LabeledDataset(
        data.images[order].copy(),
        data.labels[order].copy(),
        name=data.name,
        split=data.split,
    )


def compute_norm_stats(subset: LabeledDataset) -> NormStats:
    """Per-channel mean/std of the subset's pixels after scaling to [0, 1]."""
    scaled = subset.images / 255.0
    mean = scaled.mean(axis=(0, 2, 3))
    std = np.maximum(scaled.std(axis=(0, 2, 3)), STD_FLOOR)
    return NormStats(mean=mean, std=std)


def normalize(data: LabeledDataset, stats: NormStats) -> LabeledDataset:
    """Standardize: x -> (x/255 - mean_c) / std_c, channelwise.

    Test splits must be normalized with the training subset's stats; this
    function never looks at ``data`` itself to derive statistics.
    """
    images = (data.images / 255.0 - stats.mean[None, :, None, None]) / stats.std[
        None, :, None, None
    ]
    return replace(data, images=images, labels=data.labels.copy())


def pad_to_32(data: LabeledDataset) -> LabeledDataset:
    """Zero-pad 28x28 images by 2 pixels per side to 32x32.

    Applied to raw pixel values, before normalization, so the padding ends
    up at the normalized value of a raw zero pixel.
    """
    n, c, h, w = data.images.shape
    if (h, w) != (28, 28):
        raise ValueError(f"pad_to_32 expects 28x28 images, got shape {data.images.shape}")
    images = np.pad(data.images, ((0, 0), (0, 0), (2, 2), (2, 2)))
    return replace(data, images=images, labels=data.labels.copy())
