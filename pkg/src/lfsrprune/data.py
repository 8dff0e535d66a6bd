"""Datasets: IDX (MNIST) parsing and seeded Gaussian blobs."""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_LABELS = 0x00000801
IDX_IMAGES = 0x00000803
MAX_IDX_ITEMS = 1 << 31


class DataFormatError(ValueError):
    """Malformed or unsupported data file."""


@dataclass
class Dataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    n_classes: int

    def __post_init__(self):
        for x, y in ((self.x_train, self.y_train), (self.x_test, self.y_test)):
            if len(x) != len(y):
                raise DataFormatError("feature and label counts differ")
            if len(y) and (y.min() < 0 or y.max() >= self.n_classes):
                raise DataFormatError(f"labels must lie in [0, {self.n_classes})")
        if self.x_train.shape[1:] != self.x_test.shape[1:]:
            raise DataFormatError("train and test feature lengths differ")

    @property
    def n_features(self) -> int:
        return self.x_train.shape[1]


def parse_idx(data: bytes) -> np.ndarray:
    """Decode an IDX byte string (magic 0x801 labels or 0x803 images).

    Images come back flattened to ``(n, rows*cols)`` float64 in [0, 1];
    labels as an int64 vector.
    """
    if len(data) < 4:
        raise DataFormatError("truncated IDX header")
    (magic,) = struct.unpack(">I", data[:4])
    if magic == IDX_LABELS:
        ndim = 1
    elif magic == IDX_IMAGES:
        ndim = 3
    else:
        raise DataFormatError(f"unknown magic {magic:#010x}")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise DataFormatError("truncated IDX header")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    count = 1
    for d in dims:
        count *= d
    if count >= MAX_IDX_ITEMS:
        raise DataFormatError(f"dimensions {dims} overflow")
    payload = data[header:]
    if len(payload) < count:
        raise DataFormatError(f"truncated payload: expected {count} bytes, got {len(payload)}")
    if len(payload) > count:
        raise DataFormatError(f"{len(payload) - count} trailing bytes after payload")
    raw = np.frombuffer(payload, dtype=np.uint8)
    if ndim == 1:
        return raw.astype(np.int64)
    return raw.reshape(dims[0], dims[1] * dims[2]).astype(np.float64) / 255.0


def read_idx(path) -> np.ndarray:
    path = Path(path)
    blob = path.read_bytes()
    if path.suffix == ".gz":
        try:
            blob = gzip.decompress(blob)
        except (OSError, EOFError) as exc:
            raise DataFormatError(f"{path}: bad gzip stream ({exc})") from exc
    return parse_idx(blob)


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        if (directory / name).exists():
            return directory / name
    raise FileNotFoundError(f"{stem}[.gz] not found in {directory}")


def load_mnist(directory, n_train: int | None = None, n_test: int | None = None) -> Dataset:
    """Load the four standard MNIST IDX files from ``directory`` (optionally gzipped)."""
    d = Path(directory)
    x_train = read_idx(_find(d, "train-images-idx3-ubyte"))
    y_train = read_idx(_find(d, "train-labels-idx1-ubyte"))
    x_test = read_idx(_find(d, "t10k-images-idx3-ubyte"))
    y_test = read_idx(_find(d, "t10k-labels-idx1-ubyte"))
    return Dataset(x_train[:n_train], y_train[:n_train], x_test[:n_test], y_test[:n_test], 10)


def gen_synthetic(
    seed: int,
    n_samples: int = 600,
    n_features: int = 8,
    n_classes: int = 3,
    separation: float = 4.0,
    test_fraction: float = 0.25,
) -> Dataset:
    """Gaussian blobs, one unit-variance cluster per class.

    Centroids are drawn uniformly on a sphere of radius ``separation``.
    """
    rng = np.random.default_rng(seed)
    centroids = rng.standard_normal((n_classes, n_features))
    centroids *= separation / np.linalg.norm(centroids, axis=1, keepdims=True)
    y = rng.integers(0, n_classes, size=n_samples)
    x = centroids[y] + rng.standard_normal((n_samples, n_features))
    n_test = int(round(test_fraction * n_samples))
    return Dataset(x[n_test:], y[n_test:], x[:n_test], y[:n_test], n_classes)
