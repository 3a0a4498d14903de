"""Per-epoch metrics rows and their CSV files."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import pandas as pd

METRICS_NAME = "metrics.csv"
TIMING_NAME = "timing.csv"


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float      # percent
    test_acc: float       # percent
    compression: float    # percent of dead synapses
    rho_conv: float
    rho_fc: float
    rho_g: float
    revived: int          # synapses revived this epoch
    pruned_units: int     # units killed this epoch
    spike_rate: float     # mean firing probability of the spiking layers
    alive: list[int] = field(default_factory=list)

    def to_row(self) -> dict[str, float | int]:
        row = asdict(self)
        alive = row.pop("alive")
        row.update({f"alive_{i}": n for i, n in enumerate(alive)})
        return row

    @classmethod
    def from_row(cls, row: dict) -> EpochMetrics:
        alive_keys = sorted((k for k in row if k.startswith("alive_")), key=lambda k: int(k.split("_")[1]))
        return cls(
            epoch=int(row["epoch"]),
            train_loss=float(row["train_loss"]),
            train_acc=float(row["train_acc"]),
            test_acc=float(row["test_acc"]),
            compression=float(row["compression"]),
            rho_conv=float(row["rho_conv"]),
            rho_fc=float(row["rho_fc"]),
            rho_g=float(row["rho_g"]),
            revived=int(row["revived"]),
            pruned_units=int(row["pruned_units"]),
            spike_rate=float(row["spike_rate"]),
            alive=[int(row[k]) for k in alive_keys],
        )


def emit_metrics(metrics: Iterable[EpochMetrics], path: str | Path) -> None:
    """Write a header plus one row per epoch, replacing any existing file."""
    rows = [m.to_row() for m in metrics]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(path, index=False)


def append_metrics(metrics: EpochMetrics, path: str | Path) -> None:
    """Add one epoch, dropping rows for this epoch or later (a resumed run rewrites them)."""
    path = Path(path)
    if path.exists():
        previous = [m for m in read_metrics(path) if m.epoch < metrics.epoch]
    else:
        previous = []
    emit_metrics(previous + [metrics], path)


def read_metrics(path: str | Path) -> list[EpochMetrics]:
    df = pd.read_csv(path, float_precision="round_trip")
    return [EpochMetrics.from_row(row) for row in df.to_dict(orient="records")]


def append_timing(epoch: int, seconds: float, path: str | Path) -> None:
    """Wall-clock seconds per epoch, kept apart from the deterministic metrics file."""
    path = Path(path)
    row = pd.DataFrame([{"epoch": epoch, "seconds": round(seconds, 3)}])
    if path.exists():
        df = pd.read_csv(path, float_precision="round_trip")
        df = pd.concat([df[df["epoch"] < epoch], row], ignore_index=True)
    else:
        df = row
    df.to_csv(path, index=False)
