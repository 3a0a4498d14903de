"""Tests for run directories and training checkpoints."""

from __future__ import annotations

import numpy as np
import pytest

from devosnn.constraint import SynapseBounds, init_boundaries
from devosnn.mask import StructureMask
from devosnn.network import init_parameters
from devosnn.optim import AdamState
from devosnn.persistence import (
    CHECKPOINT_NAME,
    CheckpointError,
    RunInfo,
    TrainingCheckpoint,
    _slugify,
    active_run,
    checkpoint_load,
    checkpoint_save,
    cleanup_runs,
    complete_run,
    create_run,
    list_runs,
    load_run_info,
    save_run_info,
)
from devosnn.pruning import PruneSchedule
from devosnn.regeneration import RegenState
from devosnn.spec import build_network_spec


def _checkpoint() -> TrainingCheckpoint:
    spec = build_network_spec("Input-3C3-AvgPool2-5FC-2FC", (1, 4, 4), time_steps=2)
    rng = np.random.default_rng(0)
    params = init_parameters(spec, rng)
    mask = StructureMask.full(spec)
    mask.kill_units(1, np.array([2, 4]))
    mask.syn_revived[0][0, 0, 1, 1] = True
    regen = RegenState.initial(mask, rho_g=3.5, t_num=4)
    regen.t_g[1][2, 5] = 3
    adam = AdamState.zeros_like(params)
    adam.step = 7
    adam.m_w[0] += 0.25
    adam.v_w[1] += 0.5
    adam.m_b[0] -= 0.125
    adam.v_b[2] += 0.75
    bounds = init_boundaries(params)
    for k, name in enumerate(("n_pos", "n_neg", "n_decay")):
        getattr(bounds, name)[0].flat[k] = k + 1
    bounds.c_pos[0].flat[0] = 0.3
    bounds.n_neg[1].flat[2] = 1
    bounds.c_neg[1].flat[2] = 0.7
    bounds.r_neg[2] *= 0.5
    return TrainingCheckpoint(
        epoch=12,
        params=params,
        mask=mask,
        bounds=bounds,
        schedule=PruneSchedule(rho_fc=41.5, start_epoch=3, mid_epoch=6, per_layer=True, layer_rates={0: 12.0}),
        regen=regen,
        adam=adam,
        rng_state=np.random.default_rng([0, 1]).bit_generator.state,
        config={"train": {"epochs": 20}},
    )


def test_create_run_creates_dir_and_active(tmp_path):
    run_dir = create_run("Desk sweep", tmp_path)

    assert run_dir.is_dir()
    assert (tmp_path / ".active").read_text(encoding="utf-8") == run_dir.name
    assert run_dir.name.endswith("_desk-sweep")
    assert active_run(tmp_path) == run_dir


def test_create_run_same_name_twice(tmp_path):
    first = create_run("x", tmp_path)
    second = create_run("x", tmp_path)
    assert first != second


def test_run_info_round_trip(tmp_path):
    run_dir = create_run("info", tmp_path)
    info = RunInfo(run_id=run_dir.name, status="RECORD", epoch=4, epochs=10, summary={"test_acc": 91.0})
    save_run_info(info, run_dir)
    assert load_run_info(run_dir) == info
    assert load_run_info(tmp_path / "missing") is None


def test_complete_run_clears_active(tmp_path):
    run_dir = create_run("done", tmp_path)
    save_run_info(RunInfo(run_id=run_dir.name), run_dir)
    complete_run(run_dir)

    assert load_run_info(run_dir).completed is True
    assert active_run(tmp_path) is None


def test_cleanup_keeps_newest_completed(tmp_path):
    for name in ("a", "b", "c"):
        run_dir = tmp_path / f"2026010{ord(name) - 96}_{name}"
        run_dir.mkdir()
        save_run_info(RunInfo(run_id=run_dir.name, completed=True), run_dir)
    live = tmp_path / "20260109_live"
    live.mkdir()
    save_run_info(RunInfo(run_id=live.name), live)

    cleanup_runs(tmp_path, max_runs=1)

    assert [run_id for run_id, _ in list_runs(tmp_path)] == ["20260103_c", "20260109_live"]


def test_slugify():
    assert _slugify("Hello, World!") == "hello-world"
    assert _slugify("!!!") == "run"


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        ckpt = _checkpoint()
        path = tmp_path / CHECKPOINT_NAME
        checkpoint_save(ckpt, path)
        loaded = checkpoint_load(path)

        assert loaded.epoch == 12
        for a, b in zip(ckpt.params.weights + ckpt.params.biases, loaded.params.weights + loaded.params.biases):
            np.testing.assert_array_equal(a, b)
        assert loaded.mask.equals(ckpt.mask)
        for name in SynapseBounds.FIELDS:
            for a, b in zip(getattr(ckpt.bounds, name), getattr(loaded.bounds, name)):
                np.testing.assert_array_equal(a, b, err_msg=name)
        assert loaded.schedule == ckpt.schedule
        assert loaded.regen.rho_g == 3.5 and loaded.regen.t_g[1][2, 5] == 3
        assert loaded.adam.step == 7
        for name in ("m_w", "v_w", "m_b", "v_b"):
            for a, b in zip(getattr(ckpt.adam, name), getattr(loaded.adam, name)):
                np.testing.assert_array_equal(a, b, err_msg=name)
        for a, b in zip(ckpt.regen.t_g, loaded.regen.t_g):
            np.testing.assert_array_equal(a, b)
        assert (loaded.regen.gamma, loaded.regen.t_num) == (ckpt.regen.gamma, ckpt.regen.t_num)
        assert loaded.config == {"train": {"epochs": 20}}

        rng = np.random.default_rng()
        rng.bit_generator.state = loaded.rng_state
        expected = np.random.default_rng([0, 1])
        assert rng.random() == expected.random()

    def test_no_temp_files_left(self, tmp_path):
        checkpoint_save(_checkpoint(), tmp_path / CHECKPOINT_NAME)
        assert [p.name for p in tmp_path.iterdir()] == [CHECKPOINT_NAME]

    def test_truncated_file(self, tmp_path):
        path = tmp_path / CHECKPOINT_NAME
        checkpoint_save(_checkpoint(), path)
        path.write_bytes(path.read_bytes()[: path.stat().st_size // 2])
        with pytest.raises(CheckpointError, match="unreadable checkpoint"):
            checkpoint_load(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            checkpoint_load(tmp_path / "nope.npz")

    def test_wrong_version(self, tmp_path, monkeypatch):
        import devosnn.persistence as persistence

        path = tmp_path / CHECKPOINT_NAME
        monkeypatch.setattr(persistence, "CHECKPOINT_VERSION", 99)
        checkpoint_save(_checkpoint(), path)
        monkeypatch.setattr(persistence, "CHECKPOINT_VERSION", 1)
        with pytest.raises(CheckpointError, match="version 99"):
            checkpoint_load(path)

    def test_inconsistent_shapes(self, tmp_path):
        ckpt = _checkpoint()
        ckpt.mask.syn_alive[0] = ckpt.mask.syn_alive[0][:2]
        path = tmp_path / CHECKPOINT_NAME
        checkpoint_save(ckpt, path)
        with pytest.raises(CheckpointError, match="corrupted checkpoint"):
            checkpoint_load(path)
