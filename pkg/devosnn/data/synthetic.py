"""Seeded class-conditioned blob corpus for desk-scale runs and tests."""

from __future__ import annotations

import math

import numpy as np

from devosnn.data.dataset import Dataset

# Independent generator streams per split, derived from the same seed.
_SPLIT_STREAM = {"train": 2, "test": 3}


def blob_centers(height: int, width: int, class_count: int) -> np.ndarray:
    """One (row, col) centre per class, laid out on a near-square grid."""
    cols = math.ceil(math.sqrt(class_count))
    rows = math.ceil(class_count / cols)
    centers = []
    for k in range(class_count):
        r, c = divmod(k, cols)
        centers.append(((r + 0.5) * height / rows, (c + 0.5) * width / cols))
    return np.asarray(centers)


def synthetic_corpus(
    seed: int,
    n_samples: int,
    shape: tuple[int, int, int] = (1, 16, 16),
    class_count: int = 4,
    split: str = "train",
    noise: float = 0.1,
    jitter: float = 1.0,
) -> Dataset:
    """Gaussian blob at the class's grid position plus uniform noise.

    Labels are balanced (``n_samples // class_count`` each, remainder to the
    lowest classes) and shuffled. Identical arguments give identical corpora.
    """
    if class_count < 2:
        raise ValueError(f"class_count must be >= 2, got {class_count}")
    if n_samples < class_count:
        raise ValueError(f"n_samples ({n_samples}) must be >= class_count ({class_count})")
    if split not in _SPLIT_STREAM:
        raise ValueError(f"unknown split {split!r}")
    channels, height, width = shape
    rng = np.random.default_rng([seed, _SPLIT_STREAM[split]])

    labels = rng.permutation(np.arange(n_samples) % class_count)
    centers = blob_centers(height, width, class_count)[labels]
    centers = centers + rng.normal(0.0, jitter, size=centers.shape)
    sigma = 0.15 * min(height, width) / math.ceil(math.sqrt(class_count)) + 0.5

    rows = np.arange(height)[None, :, None]
    cols = np.arange(width)[None, None, :]
    dist2 = (rows - centers[:, 0, None, None]) ** 2 + (cols - centers[:, 1, None, None]) ** 2
    blobs = np.exp(-dist2 / (2.0 * sigma ** 2))

    images = np.repeat(blobs[:, None], channels, axis=1)
    images = images + noise * rng.random(images.shape)
    images = np.clip(images, 0.0, 1.0)
    return Dataset(inputs=images, labels=labels.astype(np.int64), class_count=class_count, split=split)
