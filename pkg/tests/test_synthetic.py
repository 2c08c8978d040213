from __future__ import annotations

import numpy as np

from src.data.synthetic import MIN_MEAN_SEPARATION, blob_means, class_means, synth_blobs
from src.nn.core import accuracy, combined_loss_backward
from src.nn.optim import sgd_step
from src.nn.params import SgdState, init_mlp


def _min_gap(points: np.ndarray) -> float:
    diffs = points[:, None, :] - points[None, :, :]
    dists = np.sqrt((diffs ** 2).sum(axis=-1))
    np.fill_diagonal(dists, np.inf)
    return float(dists.min())


def test_synth_blobs_shape_and_class_order() -> None:
    ds = synth_blobs(num_classes=4, per_class=25, dim=3, spread=0.5, seed=1)
    assert ds.features.shape == (100, 3)
    assert ds.num_classes == 4
    assert np.array_equal(ds.labels, np.repeat(np.arange(4), 25))


def test_synth_blobs_is_bitwise_deterministic() -> None:
    a = synth_blobs(num_classes=5, per_class=20, dim=4, spread=1.0, seed=42)
    b = synth_blobs(num_classes=5, per_class=20, dim=4, spread=1.0, seed=42)
    assert np.array_equal(a.features, b.features)
    assert not np.array_equal(a.features, synth_blobs(5, 20, 4, 1.0, seed=43).features)


def test_class_centroids_approach_means() -> None:
    ds = synth_blobs(num_classes=3, per_class=100, dim=2, spread=0.5, seed=6)
    means = blob_means(3, 2, 0.5, seed=6)
    distances = np.linalg.norm(class_means(ds) - means, axis=1)
    assert np.all(distances < 0.2)


def test_means_are_at_least_four_spreads_apart() -> None:
    for num_classes, dim, spread in ((10, 20, 1.0), (10, 3, 0.7), (5, 1, 0.3), (2, 2, 0.0)):
        gap = _min_gap(blob_means(num_classes, dim, spread, seed=0))
        assert gap >= max(4 * spread, MIN_MEAN_SEPARATION) - 1e-9


def test_zero_spread_is_perfectly_learnable() -> None:
    ds = synth_blobs(num_classes=3, per_class=10, dim=3, spread=0.0, seed=2)
    model = init_mlp([3, 16, 3], seed=0)
    state = SgdState.for_model(model, lr=0.5)
    for _ in range(300):
        _, grads = combined_loss_backward(model, ds.features, ds.labels)
        sgd_step(model, grads, state)
    assert accuracy(model, ds.features, ds.labels) == 1.0
