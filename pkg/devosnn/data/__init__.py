"""Datasets: IDX files, frame containers and the synthetic corpus."""

from devosnn.data.dataset import Dataset, encode_batch, encode_input
from devosnn.data.frames import FrameFormatError, load_frames, write_frames
from devosnn.data.idx import IdxFormatError, find_idx_pair, load_idx, write_idx
from devosnn.data.registry import DataSource, SourceRegistry, create_default_registry
from devosnn.data.synthetic import synthetic_corpus

__all__ = [
    "DataSource",
    "Dataset",
    "FrameFormatError",
    "IdxFormatError",
    "SourceRegistry",
    "create_default_registry",
    "encode_batch",
    "encode_input",
    "find_idx_pair",
    "load_frames",
    "load_idx",
    "synthetic_corpus",
    "write_frames",
    "write_idx",
]
