"""Non-IID partitioners and per-client train/test splitting.

Every function here is a pure function of its inputs and seed.
"""

import math
from typing import List

import numpy as np
import numpy.typing as npt

from src.data.dataset import Dataset, IndexArray, Partition
from src.utils.errors import InvalidArgumentError
from src.utils.logger import log_debug, log_warning


def _gamma_simplex(rng: np.random.Generator, concentration: float, size: int) -> npt.NDArray[np.float64]:
    """Draw from Dir(concentration * 1) by normalizing Gamma variates.

    At very small concentrations every Gamma draw can underflow to zero; the
    mass then goes to a single uniformly chosen coordinate, which is the limit
    of the distribution.
    """
    draws = rng.standard_gamma(concentration, size=size)
    total = draws.sum()
    if not total > 0 or not np.isfinite(total):
        point = np.zeros(size)
        point[rng.integers(size)] = 1.0
        return point
    return draws / total


def _largest_remainder(proportions: npt.NDArray[np.float64], total: int) -> npt.NDArray[np.int64]:
    """Integer counts summing to ``total`` that follow ``proportions``.

    Leftover units go to the largest fractional parts; ties favor lower indices.
    """
    exact = proportions * total
    counts = np.floor(exact).astype(np.int64)
    leftover = total - int(counts.sum())
    if leftover > 0:
        order = np.argsort(-(exact - counts), kind="stable")
        counts[order[:leftover]] += 1
    return counts


def _repair_empty_clients(shards: List[List[int]]) -> None:
    """Move one sample from the largest client to each empty client."""
    while True:
        empty = [k for k, shard in enumerate(shards) if not shard]
        if not empty:
            return
        sizes = [len(shard) for shard in shards]
        donor = int(np.argmax(sizes))
        if sizes[donor] < 2:
            raise InvalidArgumentError("not enough samples to give every client one")
        shards[empty[0]].append(shards[donor].pop())
        log_debug(f"Partition repair: moved one sample from client {donor} to client {empty[0]}")


def _finish(shards: List[List[int]], ds: Dataset) -> Partition:
    indices = [np.sort(np.asarray(shard, dtype=np.int64)) for shard in shards]
    return Partition(client_indices=indices, labels=ds.labels, num_classes=ds.num_classes)


def _check_clients(ds: Dataset, n_clients: int) -> None:
    if n_clients < 1:
        raise InvalidArgumentError(f"n_clients must be >= 1, got {n_clients}")
    if len(ds) < n_clients:
        raise InvalidArgumentError(f"dataset has {len(ds)} samples, fewer than {n_clients} clients")


def dirichlet_partition(ds: Dataset, n_clients: int, alpha: float, seed: int) -> Partition:
    """Label-skewed partition: each class is spread over clients by Dir(alpha).

    Args:
        ds: Dataset to partition
        n_clients: Number of clients
        alpha: Dirichlet concentration; smaller means more heterogeneous
        seed: Seed for shuffling and proportion draws

    Returns:
        Exhaustive, disjoint partition with every client non-empty
    """
    _check_clients(ds, n_clients)
    if not alpha > 0:
        raise InvalidArgumentError(f"alpha must be positive, got {alpha}")

    rng = np.random.default_rng(seed)
    shards: List[List[int]] = [[] for _ in range(n_clients)]
    for cls in range(ds.num_classes):
        members = np.flatnonzero(ds.labels == cls)
        if members.size == 0:
            continue
        members = rng.permutation(members)
        counts = _largest_remainder(_gamma_simplex(rng, alpha, n_clients), members.size)
        start = 0
        for client, count in enumerate(counts):
            shards[client].extend(members[start:start + count].tolist())
            start += count

    _repair_empty_clients(shards)
    return _finish(shards, ds)


def pathological_partition(ds: Dataset, n_clients: int, s: int, seed: int) -> Partition:
    """Each client holds exactly ``s`` classes with imbalanced shard sizes.

    Classes are dealt round-robin over a shuffled class order, so no class is
    held by more than ``ceil(n_clients * s / num_classes)`` clients. Within a
    class, shard sizes follow Dir(1) with at least one sample per holder.
    Classes nobody holds (only when ``n_clients * s < num_classes``) are left out.
    """
    _check_clients(ds, n_clients)
    if s < 1 or s > ds.num_classes:
        raise InvalidArgumentError(f"s must lie in [1, {ds.num_classes}], got {s}")

    rng = np.random.default_rng(seed)
    order = rng.permutation(ds.num_classes)
    holders: List[List[int]] = [[] for _ in range(ds.num_classes)]
    for client in range(n_clients):
        for j in range(s):
            holders[int(order[(client * s + j) % ds.num_classes])].append(client)

    shards: List[List[int]] = [[] for _ in range(n_clients)]
    for cls in range(ds.num_classes):
        owners = holders[cls]
        if not owners:
            continue
        members = rng.permutation(np.flatnonzero(ds.labels == cls))
        if members.size < len(owners):
            raise InvalidArgumentError(
                f"class {cls} has {members.size} samples but {len(owners)} clients need a shard"
            )
        extra = _largest_remainder(_gamma_simplex(rng, 1.0, len(owners)), members.size - len(owners))
        start = 0
        for owner, count in zip(owners, extra + 1):
            shards[owner].extend(members[start:start + count].tolist())
            start += count

    return _finish(shards, ds)


def iid_partition(ds: Dataset, n_clients: int, seed: int) -> Partition:
    """Uniformly shuffled, near-equal split."""
    _check_clients(ds, n_clients)
    rng = np.random.default_rng(seed)
    chunks = np.array_split(rng.permutation(len(ds)), n_clients)
    return _finish([chunk.tolist() for chunk in chunks], ds)


def split_train_test(p: Partition, test_fraction: float, seed: int) -> Partition:
    """Stratified per-client train/test split.

    Each class a client holds contributes ``round(test_fraction * count)``
    samples to the test set, capped so at least one training sample of the
    class remains. Clients whose test set comes out empty are recorded in
    ``empty_test_clients``.
    """
    if not 0.0 < test_fraction < 1.0:
        raise InvalidArgumentError(f"test_fraction must lie in (0, 1), got {test_fraction}")

    rng = np.random.default_rng(seed)
    train: List[IndexArray] = []
    test: List[IndexArray] = []
    empty: List[int] = []
    for client, indices in enumerate(p.client_indices):
        client_train: List[int] = []
        client_test: List[int] = []
        client_labels = p.labels[indices]
        for cls in np.unique(client_labels):
            members = rng.permutation(indices[client_labels == cls])
            n_test = min(int(math.floor(test_fraction * members.size + 0.5)), members.size - 1)
            client_test.extend(members[:n_test].tolist())
            client_train.extend(members[n_test:].tolist())
        train.append(np.sort(np.asarray(client_train, dtype=np.int64)))
        test.append(np.sort(np.asarray(client_test, dtype=np.int64)))
        if not client_test:
            empty.append(client)

    if empty:
        log_warning(f"Clients with an empty test split: {empty}")
    return Partition(
        client_indices=p.client_indices,
        labels=p.labels,
        num_classes=p.num_classes,
        train_indices=train,
        test_indices=test,
        empty_test_clients=empty,
    )


def label_entropy(histogram: npt.ArrayLike) -> float:
    """Shannon entropy (nats) of a count histogram."""
    counts = np.asarray(histogram, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return 0.0
    probs = counts[counts > 0] / total
    return float(-(probs * np.log(probs)).sum())


def mean_label_entropy(p: Partition) -> float:
    """Mean per-client label entropy; lower means more heterogeneous."""
    return float(np.mean([label_entropy(p.label_histogram(k)) for k in range(p.num_clients)]))
