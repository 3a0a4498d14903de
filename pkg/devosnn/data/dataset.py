"""Labelled sample container and time-axis encoding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

SPLITS = ("train", "test")


@dataclass
class Dataset:
    inputs: np.ndarray   # (N, C, H, W) static, or (N, T, C, H, W) pre-converted frames
    labels: np.ndarray   # (N,) int64
    class_count: int
    split: str = "train"

    def __post_init__(self) -> None:
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        errors: list[str] = []
        if self.split not in SPLITS:
            errors.append(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.inputs.ndim not in (4, 5):
            errors.append(f"inputs must be (N, C, H, W) or (N, T, C, H, W), got shape {self.inputs.shape}")
        if self.labels.shape != (self.inputs.shape[0],):
            errors.append(f"labels shape {self.labels.shape} does not match {self.inputs.shape[0]} samples")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            errors.append(f"labels must lie in [0, {self.class_count})")
        if self.inputs.size and (self.inputs.min() < 0.0 or self.inputs.max() > 1.0):
            errors.append("input values must lie in [0, 1]")
        if errors:
            raise ValueError("Dataset validation failed:\n" + "\n".join(f"  - {e}" for e in errors))

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def temporal(self) -> bool:
        return self.inputs.ndim == 5

    @property
    def sample_shape(self) -> tuple[int, ...]:
        """(C, H, W) of one sample, regardless of a time axis."""
        return tuple(self.inputs.shape[-3:])

    def batches(
        self, batch_size: int, rng: np.random.Generator | None = None
    ) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield (inputs, labels) minibatches; shuffled when ``rng`` is given."""
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        order = rng.permutation(len(self)) if rng is not None else np.arange(len(self))
        for start in range(0, len(self), batch_size):
            idx = order[start:start + batch_size]
            yield self.inputs[idx], self.labels[idx]


def encode_input(sample: np.ndarray, time_steps: int) -> np.ndarray:
    """Direct encoding: (C, H, W) -> (T, C, H, W) repeated; (T, C, H, W) passes through."""
    if time_steps < 1:
        raise ValueError(f"time_steps must be >= 1, got {time_steps}")
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim == 3:
        return np.repeat(sample[None], time_steps, axis=0)
    if sample.ndim == 4:
        if sample.shape[0] != time_steps:
            raise ValueError(f"frame sample has {sample.shape[0]} steps, network expects {time_steps}")
        return sample
    raise ValueError(f"sample must be (C, H, W) or (T, C, H, W), got shape {sample.shape}")


def encode_batch(inputs: np.ndarray, time_steps: int) -> np.ndarray:
    """Batch form of :func:`encode_input`: returns (B, T, C, H, W)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 4:
        return np.broadcast_to(inputs[:, None], (inputs.shape[0], time_steps) + inputs.shape[1:])
    if inputs.ndim == 5:
        if inputs.shape[1] != time_steps:
            raise ValueError(f"frame batch has {inputs.shape[1]} steps, network expects {time_steps}")
        return inputs
    raise ValueError(f"batch must be (B, C, H, W) or (B, T, C, H, W), got shape {inputs.shape}")
