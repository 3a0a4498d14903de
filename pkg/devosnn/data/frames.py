"""Dense frame container for pre-converted neuromorphic recordings.

Layout, little-endian::

    bytes 0-3    b"DFRM"
    u32 x 7      version (1), N, T, C, H, W, class_count
    u32 x N      labels
    f32 x N*T*C*H*W  frames, row-major (N, T, C, H, W)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from devosnn.data.dataset import Dataset

FRAMES_MAGIC = b"DFRM"
FRAMES_VERSION = 1
_HEADER = struct.Struct("<4s7I")


class FrameFormatError(ValueError):
    """Raised for malformed frame containers."""


def load_frames(path: str | Path, split: str = "train") -> Dataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"frame file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FrameFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, n, t, c, h, w, class_count = _HEADER.unpack_from(raw)
    if magic != FRAMES_MAGIC:
        raise FrameFormatError(f"{path}: unexpected magic {magic!r} (expected {FRAMES_MAGIC!r})")
    if version != FRAMES_VERSION:
        raise FrameFormatError(f"{path}: unsupported version {version}")
    label_bytes = 4 * n
    frame_bytes = 4 * n * t * c * h * w
    body = len(raw) - _HEADER.size
    if body < label_bytes + frame_bytes:
        raise FrameFormatError(f"{path}: truncated payload ({body} bytes, need {label_bytes + frame_bytes})")
    if body > label_bytes + frame_bytes:
        raise FrameFormatError(f"{path}: {body - label_bytes - frame_bytes} trailing bytes after payload")
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=_HEADER.size)
    frames = np.frombuffer(raw, dtype="<f4", count=n * t * c * h * w, offset=_HEADER.size + label_bytes)
    try:
        return Dataset(
            inputs=frames.reshape(n, t, c, h, w).astype(np.float64),
            labels=labels.astype(np.int64),
            class_count=class_count,
            split=split,
        )
    except ValueError as e:
        raise FrameFormatError(f"{path}: {e}") from e


def write_frames(dataset: Dataset, path: str | Path) -> None:
    if not dataset.temporal:
        raise ValueError("frame containers hold (N, T, C, H, W) datasets only")
    n, t, c, h, w = dataset.inputs.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _HEADER.pack(FRAMES_MAGIC, FRAMES_VERSION, n, t, c, h, w, dataset.class_count)
    labels = dataset.labels.astype("<u4").tobytes()
    frames = dataset.inputs.astype("<f4").tobytes()
    path.write_bytes(header + labels + frames)
