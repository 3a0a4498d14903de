"""MNIST IDX reader/writer (big-endian magic + dims header, unsigned byte payload)."""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from devosnn.data.dataset import Dataset

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

# Standard MNIST distribution names, per split.
MNIST_NAMES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class IdxFormatError(ValueError):
    """Raised for malformed IDX files."""


def _read_bytes(path: str | Path) -> bytes:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"IDX file not found: {path}")
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def _write_bytes(path: str | Path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".gz":
        with gzip.open(path, "wb") as f:
            f.write(payload)
    else:
        path.write_bytes(payload)


def _parse(raw: bytes, expected_magic: int, ndim: int, path: str | Path) -> np.ndarray:
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: truncated header ({len(raw)} bytes, need 4 for the magic)")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise IdxFormatError(f"{path}: unexpected magic 0x{magic:08x} (expected 0x{expected_magic:08x})")
    header_size = 4 + 4 * ndim
    if len(raw) < header_size:
        raise IdxFormatError(f"{path}: truncated header ({len(raw)} bytes, need {header_size})")
    dims = struct.unpack(f">{ndim}I", raw[4:header_size])
    expected = int(np.prod(dims)) if dims else 0
    payload = raw[header_size:]
    if len(payload) < expected:
        raise IdxFormatError(f"{path}: truncated payload ({len(payload)} bytes, header promises {expected})")
    if len(payload) > expected:
        raise IdxFormatError(f"{path}: {len(payload) - expected} trailing bytes after payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_idx(
    images_path: str | Path,
    labels_path: str | Path,
    class_count: int | None = None,
    split: str = "train",
) -> Dataset:
    """Load an IDX image/label pair; pixels are scaled by 1/255 into (N, 1, H, W)."""
    images = _parse(_read_bytes(images_path), IMAGES_MAGIC, 3, images_path)
    labels = _parse(_read_bytes(labels_path), LABELS_MAGIC, 1, labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"count mismatch: {images.shape[0]} images in {images_path}, {labels.shape[0]} labels in {labels_path}"
        )
    if class_count is None:
        class_count = int(labels.max()) + 1 if labels.size else 1
    if labels.size and int(labels.max()) >= class_count:
        raise IdxFormatError(f"{labels_path}: label {int(labels.max())} outside {class_count} classes")
    inputs = images.astype(np.float64)[:, None] / 255.0
    return Dataset(inputs=inputs, labels=labels.astype(np.int64), class_count=class_count, split=split)


def write_idx(dataset: Dataset, images_path: str | Path, labels_path: str | Path) -> None:
    """Write a single-channel static dataset as an IDX pair (pixels rounded to bytes)."""
    if dataset.temporal or dataset.inputs.shape[1] != 1:
        raise ValueError("IDX holds single-channel static images only")
    pixels = np.rint(dataset.inputs[:, 0] * 255.0).astype(np.uint8)
    n, h, w = pixels.shape
    _write_bytes(images_path, struct.pack(">IIII", IMAGES_MAGIC, n, h, w) + pixels.tobytes())
    labels = dataset.labels.astype(np.uint8)
    _write_bytes(labels_path, struct.pack(">II", LABELS_MAGIC, n) + labels.tobytes())


def find_idx_pair(directory: str | Path, split: str) -> tuple[Path, Path]:
    """Locate the MNIST-named image/label files of ``split`` in ``directory`` (plain or .gz)."""
    directory = Path(directory)
    found: list[Path] = []
    for name in MNIST_NAMES[split]:
        for candidate in (directory / name, directory / f"{name}.gz"):
            if candidate.exists():
                found.append(candidate)
                break
        else:
            raise FileNotFoundError(f"no {name}[.gz] in {directory}")
    return found[0], found[1]
