"""Loaders for MNIST / Fashion-MNIST (IDX) and CIFAR-10 (binary batches),
a synthetic blob generator, and the on-disk cache layout.

Cache layout is ``<root>/<dataset>/<original-filename>`` with ``root`` taken
from ``$PRUNEBENCH_DATA`` or ``~/.cache/prunebench``. Nothing here touches
the network; see :mod:`prunebench.fetch`.
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from prunebench.errors import ConsistencyError, DataError, DomainError, FormatError, LengthError
from prunebench.numerics import Rng

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD = 3073

DATASET_NAMES = ("mnist", "fashion_mnist", "cifar10", "synthetic")

IDX_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_FILES = {
    "train": [f"data_batch_{i}.bin" for i in range(1, 6)],
    "test": ["test_batch.bin"],
}


@dataclass
class Dataset:
    inputs: np.ndarray  # (n, input_dim) float64
    labels: np.ndarray  # (n,) int64
    name: str = "synthetic"

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] != self.labels.shape[0]:
            raise ConsistencyError(
                f"{self.inputs.shape[0]} inputs vs {self.labels.shape[0]} labels")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, n: int) -> "Dataset":
        return Dataset(self.inputs[:n], self.labels[:n], self.name)


def _read_bytes(path) -> bytes:
    data = Path(path).read_bytes()
    if data[:2] == b"\x1f\x8b":
        try:
            data = gzip.decompress(data)
        except (OSError, EOFError) as exc:
            raise LengthError(f"{path}: corrupt or truncated gzip stream ({exc})") from exc
    return data


def _check_magic(buf: bytes, expected: int, path) -> None:
    if len(buf) < 4:
        raise LengthError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", buf[:4])
    if magic != expected:
        raise FormatError(f"{path}: bad IDX magic, expected 0x{expected:08x}, got 0x{magic:08x}")


def parse_idx_images(buf: bytes, path="<bytes>") -> np.ndarray:
    """``(count, rows*cols)`` uint8 array from IDX image bytes."""
    _check_magic(buf, IDX_IMAGES_MAGIC, path)
    if len(buf) < 16:
        raise LengthError(f"{path}: truncated IDX image header")
    count, rows, cols = struct.unpack(">III", buf[4:16])
    expected = 16 + count * rows * cols
    if len(buf) != expected:
        raise LengthError(f"{path}: IDX image payload is {len(buf)} bytes, header implies {expected}")
    return np.frombuffer(buf, dtype=np.uint8, offset=16).reshape(count, rows * cols)


def parse_idx_labels(buf: bytes, path="<bytes>") -> np.ndarray:
    _check_magic(buf, IDX_LABELS_MAGIC, path)
    if len(buf) < 8:
        raise LengthError(f"{path}: truncated IDX label header")
    (count,) = struct.unpack(">I", buf[4:8])
    if len(buf) != 8 + count:
        raise LengthError(f"{path}: IDX label payload is {len(buf)} bytes, header implies {8 + count}")
    return np.frombuffer(buf, dtype=np.uint8, offset=8)


def load_idx(images_path, labels_path, name: str = "mnist") -> Dataset:
    """Parse an IDX image/label pair (plain or gzipped); pixels scaled by 1/255."""
    pixels = parse_idx_images(_read_bytes(images_path), images_path)
    labels = parse_idx_labels(_read_bytes(labels_path), labels_path)
    if pixels.shape[0] != labels.shape[0]:
        raise ConsistencyError(
            f"{images_path} holds {pixels.shape[0]} images but {labels_path} holds "
            f"{labels.shape[0]} labels")
    if labels.size and labels.max() > 9:
        raise FormatError(f"{labels_path}: label {labels.max()} is not a digit class")
    return Dataset(pixels / 255.0, labels.astype(np.int64), name)


def idx_image_bytes(pixels: np.ndarray, rows: int, cols: int) -> bytes:
    pixels = np.asarray(pixels, dtype=np.uint8).reshape(-1, rows * cols)
    return struct.pack(">IIII", IDX_IMAGES_MAGIC, pixels.shape[0], rows, cols) + pixels.tobytes()


def idx_label_bytes(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]) + labels.tobytes()


def to_uint8(inputs: np.ndarray) -> np.ndarray:
    """Inverse of the /255 normalization (exact for loader output)."""
    return np.rint(np.asarray(inputs) * 255.0).astype(np.uint8)


def write_idx(data: Dataset, images_path, labels_path, rows: int = 28, cols: int = 28) -> None:
    Path(images_path).write_bytes(idx_image_bytes(to_uint8(data.inputs), rows, cols))
    Path(labels_path).write_bytes(idx_label_bytes(data.labels))


def parse_cifar10(buf: bytes, path="<bytes>") -> tuple[np.ndarray, np.ndarray]:
    if len(buf) % CIFAR_RECORD:
        raise FormatError(f"{path}: size {len(buf)} is not a multiple of {CIFAR_RECORD}")
    records = np.frombuffer(buf, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = records[:, 0]
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise FormatError(f"{path}: record {bad} has label byte {labels[bad]} > 9")
    return records[:, 1:], labels


def load_cifar10(batch_paths, name: str = "cifar10") -> Dataset:
    """Concatenate CIFAR-10 binary batches; images stay channel-major."""
    if isinstance(batch_paths, (str, os.PathLike)):
        batch_paths = [batch_paths]
    pixel_parts, label_parts = [], []
    for path in batch_paths:
        pixels, labels = parse_cifar10(Path(path).read_bytes(), path)
        pixel_parts.append(pixels)
        label_parts.append(labels)
    if not pixel_parts:
        raise DomainError("no CIFAR-10 batch files given")
    pixels = np.concatenate(pixel_parts)
    return Dataset(pixels / 255.0, np.concatenate(label_parts).astype(np.int64), name)


def cifar10_bytes(pixels: np.ndarray, labels) -> bytes:
    pixels = np.asarray(pixels, dtype=np.uint8).reshape(-1, CIFAR_RECORD - 1)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1, 1)
    return np.hstack([labels, pixels]).tobytes()


def synthetic_blobs(classes: int, per_class: int, dim: int, separation: float, seed: int,
                    noise: float = 0.05, max_tries: int = 10_000) -> Dataset:
    """Gaussian blobs around class centers in ``[0, 1]^dim``.

    Centers are drawn uniformly and rejected until every pair is at least
    ``separation`` apart. Samples are clipped to the unit cube.
    """
    if classes < 2:
        raise DomainError("need at least two classes")
    if classes > 10:
        raise DomainError("labels are limited to ten classes")
    rng = Rng(seed)
    centers: list[np.ndarray] = []
    tries = 0
    while len(centers) < classes:
        tries += 1
        if tries > max_tries:
            raise DomainError(f"could not place {classes} centers {separation} apart in [0,1]^{dim}")
        c = rng.uniform(size=dim)
        if all(np.linalg.norm(c - o) >= separation for o in centers):
            centers.append(c)
    labels = np.repeat(np.arange(classes), per_class)
    inputs = np.vstack(centers)[labels] + noise * rng.normal((labels.size, dim))
    return Dataset(np.clip(inputs, 0.0, 1.0), labels, "synthetic")


def standardize(train: Dataset, *others: Dataset) -> list[Dataset]:
    """Per-feature zero-mean/unit-variance using training statistics.

    Off by default everywhere; outputs leave ``[0, 1]``.
    """
    mean = train.inputs.mean(axis=0)
    std = train.inputs.std(axis=0)
    std[std == 0] = 1.0
    return [Dataset((d.inputs - mean) / std, d.labels, d.name) for d in (train, *others)]


# -- cache ----------------------------------------------------------------------

def cache_root() -> Path:
    env = os.environ.get("PRUNEBENCH_DATA")
    return Path(env) if env else Path.home() / ".cache" / "prunebench"


def dataset_dir(name: str, root=None) -> Path:
    return (Path(root) if root is not None else cache_root()) / name


def _find(directory: Path, filename: str) -> Path:
    for candidate in (directory / filename, directory / (filename + ".gz")):
        if candidate.exists():
            return candidate
    raise DataError(f"missing {directory / filename}[.gz]")


def load_split(name: str, split: str, root=None) -> Dataset:
    """Load the standard train or test split of a cached dataset."""
    if split not in ("train", "test"):
        raise DomainError(f"unknown split {split!r}")
    directory = dataset_dir(name, root)
    if name in ("mnist", "fashion_mnist"):
        images, labels = IDX_FILES[split]
        return load_idx(_find(directory, images), _find(directory, labels), name)
    if name == "cifar10":
        return load_cifar10([_find(directory, f) for f in CIFAR_FILES[split]], name)
    raise DomainError(f"no cached files for dataset {name!r}")
