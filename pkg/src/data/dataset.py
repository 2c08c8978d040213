"""Dataset and partition containers."""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import numpy.typing as npt

from src.nn.params import DenseMatrix, as_matrix
from src.utils.errors import InvalidArgumentError, ShapeError


IndexArray = npt.NDArray[np.int64]


@dataclass
class Dataset:
    """Features, integer labels and the class count."""

    features: DenseMatrix
    labels: IndexArray
    num_classes: int

    def __post_init__(self) -> None:
        self.features = as_matrix(self.features)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.features.shape[0] < 1:
            raise InvalidArgumentError("dataset must contain at least one sample")
        if self.labels.shape[0] != self.features.shape[0]:
            raise ShapeError("label count vs feature rows", self.features.shape[0], self.labels.shape[0])
        if self.num_classes < 1:
            raise InvalidArgumentError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise InvalidArgumentError(
                f"labels must lie in [0, {self.num_classes}), got range "
                f"[{self.labels.min()}, {self.labels.max()}]"
            )

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices: npt.ArrayLike) -> "tuple[DenseMatrix, IndexArray]":
        """Features and labels at ``indices`` (copies)."""
        idx = np.asarray(indices, dtype=np.int64)
        return self.features[idx], self.labels[idx]


@dataclass
class Partition:
    """Per-client sample indices, optionally split into train and test.

    Before ``split_train_test`` runs, ``train_indices`` and ``test_indices`` are
    None and the whole client shard counts as training data.
    """

    client_indices: List[IndexArray]
    labels: IndexArray
    num_classes: int
    train_indices: Optional[List[IndexArray]] = None
    test_indices: Optional[List[IndexArray]] = None
    empty_test_clients: List[int] = field(default_factory=list)

    @property
    def num_clients(self) -> int:
        return len(self.client_indices)

    @property
    def is_split(self) -> bool:
        return self.train_indices is not None

    def sizes(self) -> List[int]:
        return [int(ix.shape[0]) for ix in self.client_indices]

    def train_of(self, client: int) -> IndexArray:
        return self.train_indices[client] if self.train_indices is not None else self.client_indices[client]

    def test_of(self, client: int) -> IndexArray:
        if self.test_indices is None:
            return np.empty(0, dtype=np.int64)
        return self.test_indices[client]

    def label_histogram(self, client: int) -> npt.NDArray[np.int64]:
        """Per-class sample counts held by ``client``."""
        return np.bincount(self.labels[self.client_indices[client]], minlength=self.num_classes)

    def label_set(self, client: int) -> List[int]:
        return [int(c) for c in np.flatnonzero(self.label_histogram(client))]

    def validate(self, num_samples: int) -> None:
        """Raise unless client shards are disjoint, in range and non-empty."""
        seen = np.zeros(num_samples, dtype=bool)
        for client, indices in enumerate(self.client_indices):
            if indices.size == 0:
                raise InvalidArgumentError(f"client {client} holds no samples")
            if indices.min() < 0 or indices.max() >= num_samples:
                raise InvalidArgumentError(f"client {client} holds out-of-range indices")
            if seen[indices].any():
                raise InvalidArgumentError(f"client {client} shares samples with another client")
            seen[indices] = True
