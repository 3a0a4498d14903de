"""Tests for the dataset container, IDX and frame files, synthetic corpus and sources."""

import gzip

import numpy as np
import pytest

from devosnn.config import DataConfig
from devosnn.data import (
    Dataset,
    FrameFormatError,
    IdxFormatError,
    create_default_registry,
    encode_batch,
    encode_input,
    find_idx_pair,
    load_frames,
    load_idx,
    synthetic_corpus,
    write_frames,
    write_idx,
)

# 4 images of 2x2 pixels, written byte by byte from the IDX layout.
FIXTURE_IMAGES = (
    bytes.fromhex("00000803" "00000004" "00000002" "00000002")
    + bytes([0, 255, 128, 1,
             10, 20, 30, 40,
             255, 255, 255, 255,
             0, 0, 0, 51])
)
FIXTURE_LABELS = bytes.fromhex("00000801" "00000004") + bytes([3, 0, 9, 1])


@pytest.fixture
def idx_pair(tmp_path):
    images = tmp_path / "images.idx"
    labels = tmp_path / "labels.idx"
    images.write_bytes(FIXTURE_IMAGES)
    labels.write_bytes(FIXTURE_LABELS)
    return images, labels


class TestDataset:
    def test_validation_collects_errors(self):
        with pytest.raises(ValueError, match="Dataset validation failed") as exc:
            Dataset(inputs=np.full((2, 1, 2, 2), 2.0), labels=np.array([0, 5]), class_count=2, split="dev")
        message = str(exc.value)
        assert "split" in message and "labels must lie" in message and "[0, 1]" in message

    def test_batches_cover_everything(self):
        ds = synthetic_corpus(0, 10, (1, 4, 4), 2)
        seen = np.concatenate([labels for _, labels in ds.batches(3)])
        np.testing.assert_array_equal(seen, ds.labels)
        sizes = [len(labels) for _, labels in ds.batches(3, np.random.default_rng(0))]
        assert sizes == [3, 3, 3, 1]

    def test_bad_batch_size(self):
        with pytest.raises(ValueError, match="batch_size"):
            next(synthetic_corpus(0, 4, (1, 4, 4), 2).batches(0))


class TestLoadIdx:
    def test_fixture_pixels(self, idx_pair):
        ds = load_idx(*idx_pair, class_count=10)
        assert len(ds) == 4
        assert ds.inputs.shape == (4, 1, 2, 2)
        np.testing.assert_allclose(ds.inputs[0, 0] * 255.0, [[0, 255], [128, 1]])
        assert ds.inputs[3, 0, 1, 1] == pytest.approx(0.2)
        np.testing.assert_array_equal(ds.labels, [3, 0, 9, 1])

    def test_class_count_inferred(self, idx_pair):
        assert load_idx(*idx_pair).class_count == 10

    def test_gzip(self, tmp_path):
        images = tmp_path / "i.gz"
        labels = tmp_path / "l.gz"
        images.write_bytes(gzip.compress(FIXTURE_IMAGES))
        labels.write_bytes(gzip.compress(FIXTURE_LABELS))
        assert load_idx(images, labels).labels.tolist() == [3, 0, 9, 1]

    def test_labels_as_images(self, idx_pair):
        _, labels = idx_pair
        with pytest.raises(IdxFormatError, match="unexpected magic"):
            load_idx(labels, labels)

    def test_truncated_payload(self, tmp_path, idx_pair):
        short = tmp_path / "short.idx"
        short.write_bytes(FIXTURE_IMAGES[:-3])
        with pytest.raises(IdxFormatError, match="truncated payload"):
            load_idx(short, idx_pair[1])

    def test_truncated_header(self, tmp_path, idx_pair):
        short = tmp_path / "short.idx"
        short.write_bytes(FIXTURE_IMAGES[:6])
        with pytest.raises(IdxFormatError, match="truncated header"):
            load_idx(short, idx_pair[1])

    def test_trailing_bytes(self, tmp_path, idx_pair):
        long = tmp_path / "long.idx"
        long.write_bytes(FIXTURE_IMAGES + b"\x00")
        with pytest.raises(IdxFormatError, match="trailing"):
            load_idx(long, idx_pair[1])

    def test_count_mismatch(self, tmp_path, idx_pair):
        labels = tmp_path / "three.idx"
        labels.write_bytes(bytes.fromhex("00000801" "00000003") + bytes([1, 2, 3]))
        with pytest.raises(IdxFormatError, match="count mismatch"):
            load_idx(idx_pair[0], labels)

    def test_empty(self, tmp_path):
        images = tmp_path / "i.idx"
        labels = tmp_path / "l.idx"
        images.write_bytes(bytes.fromhex("00000803" "00000000" "0000001c" "0000001c"))
        labels.write_bytes(bytes.fromhex("00000801" "00000000"))
        ds = load_idx(images, labels, class_count=10)
        assert len(ds) == 0
        assert ds.sample_shape == (1, 28, 28)

    def test_missing_file(self, tmp_path, idx_pair):
        with pytest.raises(FileNotFoundError):
            load_idx(tmp_path / "nope", idx_pair[1])

    def test_write_then_read(self, tmp_path, idx_pair):
        ds = load_idx(*idx_pair, class_count=10)
        write_idx(ds, tmp_path / "out" / "train-images-idx3-ubyte.gz", tmp_path / "out" / "train-labels-idx1-ubyte")
        images, labels = find_idx_pair(tmp_path / "out", "train")
        assert images.name.endswith(".gz")
        again = load_idx(images, labels, class_count=10)
        np.testing.assert_array_equal(again.inputs, ds.inputs)

    def test_find_pair_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="t10k-images"):
            find_idx_pair(tmp_path, "test")


class TestFrames:
    def _frames(self, n=3, t=2):
        rng = np.random.default_rng(0)
        inputs = (rng.uniform(size=(n, t, 2, 3, 3)) > 0.5).astype(float)
        return Dataset(inputs=inputs, labels=np.arange(n) % 2, class_count=2, split="test")

    def test_round_trip(self, tmp_path):
        ds = self._frames()
        write_frames(ds, tmp_path / "test.frames")
        again = load_frames(tmp_path / "test.frames", split="test")
        assert again.temporal
        np.testing.assert_array_equal(again.inputs, ds.inputs)
        np.testing.assert_array_equal(again.labels, ds.labels)
        assert again.class_count == 2

    def test_truncated(self, tmp_path):
        path = tmp_path / "x.frames"
        write_frames(self._frames(), path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(FrameFormatError, match="truncated payload"):
            load_frames(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.frames"
        path.write_bytes(b"NOPE" + bytes(28))
        with pytest.raises(FrameFormatError, match="unexpected magic"):
            load_frames(path)

    def test_static_dataset_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="frame containers"):
            write_frames(synthetic_corpus(0, 4, (1, 4, 4), 2), tmp_path / "x.frames")


class TestEncodeInput:
    def test_replicates(self):
        sample = np.random.default_rng(0).uniform(size=(1, 3, 3))
        out = encode_input(sample, 3)
        assert out.shape == (3, 1, 3, 3)
        for t in range(3):
            np.testing.assert_array_equal(out[t], sample)

    def test_zero_image(self):
        assert not encode_input(np.zeros((2, 4, 4)), 5).any()

    def test_frames_pass_through(self):
        frames = np.random.default_rng(1).uniform(size=(4, 2, 3, 3))
        np.testing.assert_array_equal(encode_input(frames, 4), frames)

    def test_frame_length_mismatch(self):
        with pytest.raises(ValueError, match="network expects 3"):
            encode_input(np.zeros((4, 2, 3, 3)), 3)

    def test_batch(self):
        batch = encode_batch(np.ones((2, 1, 3, 3)), 4)
        assert batch.shape == (2, 4, 1, 3, 3)


class TestSyntheticCorpus:
    def test_deterministic(self):
        a = synthetic_corpus(5, 40, (1, 8, 8), 4)
        b = synthetic_corpus(5, 40, (1, 8, 8), 4)
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_seed_and_split_differ(self):
        a = synthetic_corpus(5, 40, (1, 8, 8), 4)
        assert not np.array_equal(a.inputs, synthetic_corpus(6, 40, (1, 8, 8), 4).inputs)
        assert not np.array_equal(a.inputs, synthetic_corpus(5, 40, (1, 8, 8), 4, split="test").inputs)

    def test_balanced_and_in_range(self):
        ds = synthetic_corpus(0, 42, (2, 8, 8), 4)
        assert np.bincount(ds.labels).tolist() == [11, 11, 10, 10]
        assert ds.inputs.min() >= 0.0 and ds.inputs.max() <= 1.0
        assert ds.inputs.shape == (42, 2, 8, 8)

    def test_nearest_centroid_separable(self):
        train = synthetic_corpus(0, 200, (1, 16, 16), 2)
        test = synthetic_corpus(0, 200, (1, 16, 16), 2, split="test")
        centroids = np.stack([train.inputs[train.labels == k].mean(axis=0).ravel() for k in range(2)])
        flat = test.inputs.reshape(len(test), -1)
        predicted = np.argmin(((flat[:, None] - centroids[None]) ** 2).sum(axis=2), axis=1)
        assert (predicted == test.labels).mean() > 0.95

    @pytest.mark.parametrize("n,k", [(10, 1), (3, 4)])
    def test_invalid(self, n, k):
        with pytest.raises(ValueError):
            synthetic_corpus(0, n, (1, 4, 4), k)


class TestSourceRegistry:
    def test_default_sources(self):
        registry = create_default_registry()
        assert len(registry) == 3
        assert "synthetic" in registry and "idx" in registry and "frames" in registry
        assert registry.get("nope") is None

    def test_synthetic_source_uses_config(self):
        source = create_default_registry().get("synthetic")
        cfg = DataConfig(shape=[1, 6, 6], class_count=3, n_train=30, n_test=9)
        train = source.load(cfg, "train")
        test = source.load(cfg, "test")
        assert len(train) == 30 and len(test) == 9
        assert train.sample_shape == (1, 6, 6)

    def test_find_reader(self, tmp_path, idx_pair):
        registry = create_default_registry()
        assert registry.find_reader(tmp_path) is None
        ds = load_idx(*idx_pair, class_count=10)
        write_idx(ds, tmp_path / "t10k-images-idx3-ubyte", tmp_path / "t10k-labels-idx1-ubyte")
        assert registry.find_reader(tmp_path).name == "idx"

    def test_frames_source(self, tmp_path):
        inputs = np.zeros((2, 3, 1, 2, 2))
        write_frames(Dataset(inputs=inputs, labels=np.array([0, 1]), class_count=2), tmp_path / "test.frames")
        registry = create_default_registry()
        source = registry.find_reader(tmp_path)
        assert source.name == "frames"
        assert source.load(DataConfig(source="frames", path=str(tmp_path)), "test").temporal

    def test_required_files(self, tmp_path):
        source = create_default_registry().get("idx")
        names = [p.name for p in source.required_files(DataConfig(source="idx", path=str(tmp_path)))]
        assert names[0] == "train-images-idx3-ubyte"
        assert len(names) == 4
