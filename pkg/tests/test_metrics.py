"""Tests for the per-epoch metrics CSV."""

import pandas as pd
import pytest

from devosnn.metrics import EpochMetrics, append_metrics, append_timing, emit_metrics, read_metrics


def _m(epoch, **kw):
    values = dict(
        train_loss=0.5, train_acc=80.0, test_acc=78.5, compression=12.5, rho_conv=10.0, rho_fc=35.0,
        rho_g=1.0, revived=0, pruned_units=0, spike_rate=0.1, alive=[8, 100, 4],
    )
    values.update(kw)
    return EpochMetrics(epoch=epoch, **values)


class TestEmitMetrics:
    def test_header_and_rows(self, tmp_path):
        path = tmp_path / "metrics.csv"
        emit_metrics([_m(0), _m(1)], path)
        df = pd.read_csv(path)
        assert list(df.columns[:4]) == ["epoch", "train_loss", "train_acc", "test_acc"]
        assert list(df.columns[-3:]) == ["alive_0", "alive_1", "alive_2"]
        assert len(df) == 2

    def test_read_back_exact(self, tmp_path):
        path = tmp_path / "metrics.csv"
        original = _m(3, train_loss=0.1 + 0.2, spike_rate=1 / 3, alive=[1, 2])
        emit_metrics([original], path)
        assert read_metrics(path) == [original]

    def test_append_replaces_later_epochs(self, tmp_path):
        path = tmp_path / "metrics.csv"
        for epoch in range(4):
            append_metrics(_m(epoch), path)
        append_metrics(_m(2, test_acc=99.0), path)
        rows = read_metrics(path)
        assert [m.epoch for m in rows] == [0, 1, 2]
        assert rows[-1].test_acc == 99.0

    def test_creates_parent(self, tmp_path):
        path = tmp_path / "nested" / "metrics.csv"
        append_metrics(_m(0), path)
        assert path.exists()


class TestTiming:
    def test_sidecar_rows(self, tmp_path):
        path = tmp_path / "timing.csv"
        append_timing(0, 1.23456, path)
        append_timing(1, 2.0, path)
        append_timing(1, 3.0, path)
        df = pd.read_csv(path)
        assert df["epoch"].tolist() == [0, 1]
        assert df["seconds"].tolist() == pytest.approx([1.235, 3.0])
