"""Run directories (runs/<run_id>/) and versioned training checkpoints."""

from __future__ import annotations

import json
import re
import shutil
import tempfile
import zipfile
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, IO

import numpy as np

from devosnn.constraint import SynapseBounds
from devosnn.mask import StructureMask
from devosnn.network import Parameters
from devosnn.optim import AdamState
from devosnn.pruning import PruneSchedule
from devosnn.regeneration import RegenState

CHECKPOINT_VERSION = 1
CHECKPOINT_NAME = "checkpoint.npz"
RUN_INFO_NAME = "run.json"


class CheckpointError(ValueError):
    """Raised when a checkpoint cannot be read back."""


@dataclass
class RunInfo:
    run_id: str
    status: str = "created"     # Phase.name of the last persisted step
    epoch: int = -1             # last recorded epoch
    epochs: int = 0
    mode: str = "full"
    completed: bool = False
    last_error: str = ""
    summary: dict[str, float] = field(default_factory=dict)


def _slugify(name: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")
    slug = slug[:30].rstrip("-")
    return slug or "run"


def atomic_write(path: Path, write: Callable[[IO[bytes]], None]) -> None:
    """Write through a temp file in the same directory, then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with open(fd, "wb") as f:
            write(f)
        Path(tmp).replace(path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def create_run(name: str, runs_dir: Path) -> Path:
    """Create a new run directory and mark it active."""
    runs_dir.mkdir(parents=True, exist_ok=True)
    base_id = f"{datetime.now().strftime('%Y%m%d_%H%M%S')}_{_slugify(name)}"
    run_id = base_id
    suffix = 1
    while (runs_dir / run_id).exists():
        run_id = f"{base_id}-{suffix}"
        suffix += 1
    run_dir = runs_dir / run_id
    run_dir.mkdir(parents=True, exist_ok=False)
    (runs_dir / ".active").write_text(run_id, encoding="utf-8")
    return run_dir


def save_run_info(info: RunInfo, run_dir: Path) -> None:
    payload = json.dumps(asdict(info), indent=2).encode()
    atomic_write(run_dir / RUN_INFO_NAME, lambda f: f.write(payload))


def load_run_info(run_dir: Path) -> RunInfo | None:
    path = run_dir / RUN_INFO_NAME
    if not path.exists():
        return None
    with open(path) as f:
        return RunInfo(**json.load(f))


def active_run(runs_dir: Path) -> Path | None:
    """Directory of the active run, if any."""
    active_path = runs_dir / ".active"
    if not active_path.exists():
        return None
    run_id = active_path.read_text(encoding="utf-8").strip()
    if not run_id or not (runs_dir / run_id).is_dir():
        return None
    return runs_dir / run_id


def complete_run(run_dir: Path) -> None:
    """Mark a run completed and clear the active pointer if it points at it."""
    info = load_run_info(run_dir) or RunInfo(run_id=run_dir.name)
    info.completed = True
    save_run_info(info, run_dir)
    active_path = run_dir.parent / ".active"
    if active_path.exists() and active_path.read_text(encoding="utf-8").strip() == run_dir.name:
        active_path.write_text("", encoding="utf-8")


def cleanup_runs(runs_dir: Path, max_runs: int = 20) -> None:
    """Delete the oldest completed runs beyond ``max_runs``."""
    completed = [run_id for run_id, info in list_runs(runs_dir) if info.completed]
    to_delete = completed if max_runs <= 0 else completed[:-max_runs]
    for run_id in to_delete:
        shutil.rmtree(runs_dir / run_id, ignore_errors=True)


def list_runs(runs_dir: Path) -> list[tuple[str, RunInfo]]:
    """All runs with a run.json, sorted by run id."""
    results: list[tuple[str, RunInfo]] = []
    if not runs_dir.exists():
        return results
    for child in runs_dir.iterdir():
        if not child.is_dir():
            continue
        info = load_run_info(child)
        if info is not None:
            results.append((child.name, info))
    results.sort(key=lambda item: item[0])
    return results


# -- Checkpoints --


@dataclass
class TrainingCheckpoint:
    epoch: int                    # last completed epoch
    params: Parameters
    mask: StructureMask
    bounds: SynapseBounds
    schedule: PruneSchedule
    regen: RegenState
    adam: AdamState
    rng_state: dict[str, Any]     # shuffle generator's bit_generator.state
    config: dict[str, Any]        # resolved experiment config


def _put(arrays: dict[str, np.ndarray], prefix: str, values: list[np.ndarray]) -> None:
    for i, a in enumerate(values):
        arrays[f"{prefix}/{i}"] = a


def _take(data: Any, prefix: str, count: int) -> list[np.ndarray]:
    return [np.array(data[f"{prefix}/{i}"]) for i in range(count)]


def checkpoint_save(ckpt: TrainingCheckpoint, path: str | Path) -> None:
    """Write the full training state as one .npz (arrays plus a JSON meta record)."""
    path = Path(path)
    arrays: dict[str, np.ndarray] = {}
    _put(arrays, "params/w", ckpt.params.weights)
    _put(arrays, "params/b", ckpt.params.biases)
    _put(arrays, "mask/unit_alive", ckpt.mask.unit_alive)
    _put(arrays, "mask/syn_alive", ckpt.mask.syn_alive)
    _put(arrays, "mask/syn_revived", ckpt.mask.syn_revived)
    for name in SynapseBounds.FIELDS:
        _put(arrays, f"bounds/{name}", getattr(ckpt.bounds, name))
    _put(arrays, "regen/t_g", ckpt.regen.t_g)
    for name in ("m_w", "v_w", "m_b", "v_b"):
        _put(arrays, f"adam/{name}", getattr(ckpt.adam, name))

    schedule = asdict(ckpt.schedule)
    schedule["layer_rates"] = {str(k): v for k, v in ckpt.schedule.layer_rates.items()}
    meta = {
        "version": CHECKPOINT_VERSION,
        "epoch": ckpt.epoch,
        "layers": len(ckpt.params),
        "schedule": schedule,
        "regen": {"rho_g": ckpt.regen.rho_g, "gamma": ckpt.regen.gamma, "t_num": ckpt.regen.t_num},
        "adam_step": ckpt.adam.step,
        "rng_state": ckpt.rng_state,
        "config": ckpt.config,
    }
    arrays["meta"] = np.array(json.dumps(meta))
    atomic_write(path, lambda f: np.savez(f, **arrays))


def checkpoint_load(path: str | Path) -> TrainingCheckpoint:
    """Read a checkpoint back; any inconsistency raises CheckpointError."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            version = meta.get("version")
            if version != CHECKPOINT_VERSION:
                raise CheckpointError(
                    f"{path}: checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})"
                )
            n = int(meta["layers"])
            params = Parameters(_take(data, "params/w", n), _take(data, "params/b", n))
            mask = StructureMask(
                unit_alive=_take(data, "mask/unit_alive", n),
                syn_alive=_take(data, "mask/syn_alive", n),
                syn_revived=_take(data, "mask/syn_revived", n),
            )
            bounds = SynapseBounds(**{name: _take(data, f"bounds/{name}", n) for name in SynapseBounds.FIELDS})
            regen = RegenState(t_g=_take(data, "regen/t_g", n), **meta["regen"])
            adam = AdamState(
                step=int(meta["adam_step"]),
                **{name: _take(data, f"adam/{name}", n) for name in ("m_w", "v_w", "m_b", "v_b")},
            )
    except CheckpointError:
        raise
    except (OSError, KeyError, ValueError, EOFError, zipfile.BadZipFile) as e:
        raise CheckpointError(f"{path}: unreadable checkpoint ({type(e).__name__}: {e})") from e

    schedule_raw = dict(meta["schedule"])
    schedule_raw["layer_rates"] = {int(k): float(v) for k, v in schedule_raw.get("layer_rates", {}).items()}
    ckpt = TrainingCheckpoint(
        epoch=int(meta["epoch"]),
        params=params,
        mask=mask,
        bounds=bounds,
        schedule=PruneSchedule(**schedule_raw),
        regen=regen,
        adam=adam,
        rng_state=meta["rng_state"],
        config=meta["config"],
    )
    _check_consistent(ckpt, path)
    return ckpt


def _check_consistent(ckpt: TrainingCheckpoint, path: Path) -> None:
    errors: list[str] = []
    for i, w in enumerate(ckpt.params.weights):
        shaped = [ckpt.mask.syn_alive[i], ckpt.mask.syn_revived[i], ckpt.regen.t_g[i],
                  ckpt.adam.m_w[i], ckpt.adam.v_w[i]]
        shaped += [getattr(ckpt.bounds, name)[i] for name in SynapseBounds.FIELDS]
        if any(a.shape != w.shape for a in shaped):
            errors.append(f"weighted layer {i}: per-synapse arrays disagree with weight shape {w.shape}")
        units = (w.shape[0],)
        if any(a.shape != units for a in (ckpt.params.biases[i], ckpt.mask.unit_alive[i],
                                          ckpt.adam.m_b[i], ckpt.adam.v_b[i])):
            errors.append(f"weighted layer {i}: per-unit arrays disagree with {w.shape[0]} units")
    if errors:
        raise CheckpointError(f"{path}: corrupted checkpoint:\n" + "\n".join(f"  - {e}" for e in errors))
