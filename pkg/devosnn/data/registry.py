"""Data source base class and registry."""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import TYPE_CHECKING

from devosnn.data.dataset import Dataset
from devosnn.data.frames import load_frames
from devosnn.data.idx import MNIST_NAMES, find_idx_pair, load_idx
from devosnn.data.synthetic import synthetic_corpus

if TYPE_CHECKING:
    from devosnn.config import DataConfig

log = logging.getLogger(__name__)


class DataSource(ABC):
    """Where a run's train/test splits come from."""

    @property
    @abstractmethod
    def name(self) -> str: ...

    @property
    @abstractmethod
    def description(self) -> str: ...

    @abstractmethod
    def load(self, cfg: DataConfig, split: str) -> Dataset:
        """Load one split as described by the data config section."""
        ...

    def required_files(self, cfg: DataConfig) -> list[Path]:
        """Files that must exist before a run may start."""
        return []

    def can_read(self, directory: Path) -> bool:
        """Return True if ``directory`` holds a test split this source understands."""
        return False


class SyntheticSource(DataSource):
    @property
    def name(self) -> str:
        return "synthetic"

    @property
    def description(self) -> str:
        return "Seeded Gaussian-blob corpus (data.n_train / data.n_test samples)"

    def load(self, cfg: DataConfig, split: str) -> Dataset:
        n = cfg.n_train if split == "train" else cfg.n_test
        return synthetic_corpus(cfg.seed, n, tuple(cfg.shape), cfg.class_count, split, noise=cfg.noise)


class IdxSource(DataSource):
    @property
    def name(self) -> str:
        return "idx"

    @property
    def description(self) -> str:
        return "MNIST-format IDX image/label files in data.path (plain or .gz)"

    def load(self, cfg: DataConfig, split: str) -> Dataset:
        images, labels = find_idx_pair(Path(cfg.path).expanduser(), split)
        log.info("Loading %s split from %s", split, images)
        return load_idx(images, labels, class_count=cfg.class_count, split=split)

    def required_files(self, cfg: DataConfig) -> list[Path]:
        directory = Path(cfg.path).expanduser()
        files = []
        for split in ("train", "test"):
            try:
                files.extend(find_idx_pair(directory, split))
            except FileNotFoundError:
                files.extend(directory / name for name in MNIST_NAMES[split])
        return files

    def can_read(self, directory: Path) -> bool:
        try:
            find_idx_pair(directory, "test")
        except FileNotFoundError:
            return False
        return True


class FramesSource(DataSource):
    @property
    def name(self) -> str:
        return "frames"

    @property
    def description(self) -> str:
        return "Pre-converted frame containers data.path/{train,test}.frames"

    def load(self, cfg: DataConfig, split: str) -> Dataset:
        path = Path(cfg.path).expanduser() / f"{split}.frames"
        log.info("Loading %s split from %s", split, path)
        return load_frames(path, split=split)

    def required_files(self, cfg: DataConfig) -> list[Path]:
        directory = Path(cfg.path).expanduser()
        return [directory / "train.frames", directory / "test.frames"]

    def can_read(self, directory: Path) -> bool:
        return (directory / "test.frames").exists()


class SourceRegistry:
    """Registry of available data sources, keyed by name."""

    def __init__(self) -> None:
        self._sources: dict[str, DataSource] = {}

    def register(self, source: DataSource) -> None:
        self._sources[source.name] = source
        log.debug("Registered data source: %s", source.name)

    def get(self, name: str) -> DataSource | None:
        return self._sources.get(name)

    def find_reader(self, directory: str | Path) -> DataSource | None:
        """First source that can read the test split stored in ``directory``."""
        directory = Path(directory)
        for source in self._sources.values():
            if source.can_read(directory):
                return source
        return None

    def list_sources(self) -> list[DataSource]:
        return list(self._sources.values())

    def __contains__(self, name: str) -> bool:
        return name in self._sources

    def __len__(self) -> int:
        return len(self._sources)


def create_default_registry() -> SourceRegistry:
    registry = SourceRegistry()
    registry.register(SyntheticSource())
    registry.register(IdxSource())
    registry.register(FramesSource())
    return registry
