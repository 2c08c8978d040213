"""Datasets, non-IID partitioners and IDX ingestion."""

from src.data.dataset import Dataset, Partition
from src.data.idx import load_idx
from src.data.partition import (
    dirichlet_partition,
    iid_partition,
    mean_label_entropy,
    pathological_partition,
    split_train_test,
)
from src.data.synthetic import synth_blobs

__all__ = [
    'Dataset',
    'Partition',
    'dirichlet_partition',
    'iid_partition',
    'load_idx',
    'mean_label_entropy',
    'pathological_partition',
    'split_train_test',
    'synth_blobs',
]
